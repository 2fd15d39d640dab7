#pragma once

#include <apc/cli.hpp>
#include <apc/comm.hpp>
#include <apc/compositor.hpp>
#include <apc/config.hpp>
#include <apc/error.hpp>
#include <apc/image.hpp>
#include <apc/io.hpp>
#include <apc/metrics.hpp>
#include <apc/moments.hpp>
#include <apc/renderer.hpp>
#include <apc/report.hpp>
#include <apc/scene.hpp>
#include <apc/vec3.hpp>
