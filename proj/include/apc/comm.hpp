#pragma once

// Simulated rank communication: deterministic reductions over images and the
// byte/message counters that go with them.

#include <apc/error.hpp>
#include <apc/image.hpp>

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace apc {

// Wire model: every scalar travels as a 32-bit float.
inline constexpr std::uint64_t kWireScalarBytes = 4;
inline constexpr std::uint64_t kColorScalars = 4;
// A segment carries a premultiplied RGBA color and a depth interval.
inline constexpr std::uint64_t kSegmentColorBytes = 16;
inline constexpr std::uint64_t kSegmentDepthBytes = 8;
inline constexpr std::uint64_t kSegmentBytes = kSegmentColorBytes + kSegmentDepthBytes;

struct CommStats {
  // Moments are counted as 5 scalars (b0..b4); `moment_scalars` = 4 selects
  // the compact accounting that leaves b0 out.
  int moment_scalars{5};
  std::uint64_t moment_records{0};  // per-rank pixel records entering the all-reduce
  std::uint64_t color_records{0};   // per-rank pixel records entering the reduce
  std::uint64_t segments_exchanged{0};
  std::uint64_t messages{0};

  std::uint64_t bytes_moments_allreduce() const {
    return moment_records * static_cast<std::uint64_t>(moment_scalars) * kWireScalarBytes;
  }
  std::uint64_t bytes_color_reduce() const { return color_records * kColorScalars * kWireScalarBytes; }
  std::uint64_t bytes_segments() const { return segments_exchanged * kSegmentBytes; }
  std::uint64_t bytes_segments_color_only() const { return segments_exchanged * kSegmentColorBytes; }
  std::uint64_t total_bytes() const {
    return bytes_moments_allreduce() + bytes_color_reduce() + bytes_segments();
  }

  CommStats& operator+=(const CommStats& o) {
    moment_records += o.moment_records;
    color_records += o.color_records;
    segments_exchanged += o.segments_exchanged;
    messages += o.messages;
    return *this;
  }
};

namespace detail {

// Sums `values` in ascending order of value. The result depends only on the
// multiset of inputs, so relabeling ranks cannot change a single bit.
template <typename T>
T canonical_sum(std::span<T> values) {
  std::sort(values.begin(), values.end());
  T acc = T(0);
  for (T v : values) acc += v;
  return acc;
}

}  // namespace detail

// Element-wise sum of all ranks' moment images. Every rank receives the result.
inline MomentImage sum_moment_images(std::span<const MomentImage> images) {
  if (images.empty()) throw ContractViolation("reduction needs at least one image");
  for (const auto& img : images) require_same_shape(img, images.front(), "moment images differ in size");
  MomentImage out(images.front().width(), images.front().height());
  std::vector<double> column(images.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (int i = 0; i < kMomentCount; ++i) {
      for (std::size_t r = 0; r < images.size(); ++r) column[r] = images[r][p][i];
      out[p][i] = detail::canonical_sum(std::span<double>(column));
    }
  }
  return out;
}

inline ColorImage sum_color_images(std::span<const ColorImage> images) {
  if (images.empty()) throw ContractViolation("reduction needs at least one image");
  for (const auto& img : images) require_same_shape(img, images.front(), "color images differ in size");
  ColorImage out(images.front().width(), images.front().height());
  std::vector<float> column(images.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (int c = 0; c < 4; ++c) {
      for (std::size_t r = 0; r < images.size(); ++r) column[r] = images[r][p][c];
      out[p][c] = detail::canonical_sum(std::span<float>(column));
    }
  }
  return out;
}

struct MomentReduction {
  MomentImage result;
  CommStats stats;
};

struct ColorReduction {
  ColorImage result;
  CommStats stats;
};

inline MomentReduction allreduce_add_moments(std::span<const MomentImage> per_rank, int moment_scalars = 5) {
  MomentReduction out{sum_moment_images(per_rank), {}};
  out.stats.moment_scalars = moment_scalars;
  out.stats.moment_records = per_rank.size() * out.result.size();
  out.stats.messages = 1;
  return out;
}

inline ColorReduction reduce_add_color(std::span<const ColorImage> per_rank, int root = 0) {
  if (root < 0 || static_cast<std::size_t>(root) >= per_rank.size()) throw ContractViolation("reduce root out of range");
  ColorReduction out{sum_color_images(per_rank), {}};
  out.stats.color_records = per_rank.size() * out.result.size();
  out.stats.messages = 1;
  return out;
}

class GroupAborted : public std::runtime_error {
 public:
  GroupAborted() : std::runtime_error("rank group aborted by a failing rank") {}
};

// A group of simulated ranks, each on its own worker thread. Collectives
// block until every rank has contributed; the reduction itself runs on the
// last arriving worker over rank-indexed slots, so arrival order never
// affects the result.
class RankGroup {
 public:
  explicit RankGroup(int n, int moment_scalars = 5) : n_(n), moment_slots_(static_cast<std::size_t>(std::max(n, 1))), color_slots_(static_cast<std::size_t>(std::max(n, 1))) {
    if (n < 1) throw ContractViolation("rank group needs n >= 1");
    stats_.moment_scalars = moment_scalars;
  }

  int size() const { return n_; }

  MomentImage allreduce_add_moments(int rank, MomentImage local) {
    MomentImage result = collective(rank, moment_slots_, std::move(local), moment_result_, [this] {
      MomentReduction red = apc::allreduce_add_moments(moment_slots_, stats_.moment_scalars);
      stats_ += red.stats;
      return std::move(red.result);
    });
    return result;
  }

  // Returns the sum on `root`, nothing elsewhere.
  std::optional<ColorImage> reduce_add_color(int rank, ColorImage local, int root = 0) {
    ColorImage result = collective(rank, color_slots_, std::move(local), color_result_, [this, root] {
      ColorReduction red = apc::reduce_add_color(color_slots_, root);
      stats_ += red.stats;
      return std::move(red.result);
    });
    if (rank != root) return std::nullopt;
    return result;
  }

  CommStats stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
  }

  // Runs body(rank) on n workers and joins them. If any rank throws, the group
  // is aborted so blocked peers wake up, and the first error is rethrown.
  void run(const std::function<void(int)>& body) {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> workers;
      workers.reserve(static_cast<std::size_t>(n_));
      for (int r = 0; r < n_; ++r) {
        workers.emplace_back([&, r] {
          try {
            body(r);
          } catch (const GroupAborted&) {
          } catch (...) {
            {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
            abort();
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  void abort() {
    std::lock_guard lock(mutex_);
    aborted_ = true;
    cv_.notify_all();
  }

 private:
  template <typename T, typename Combine>
  T collective(int rank, std::vector<T>& slots, T local, T& shared_result, Combine&& combine) {
    if (rank < 0 || rank >= n_) throw ContractViolation("rank id out of range");
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !draining_ || aborted_; });
    if (aborted_) throw GroupAborted();
    slots[static_cast<std::size_t>(rank)] = std::move(local);
    if (++arrived_ == n_) {
      try {
        shared_result = combine();
      } catch (...) {
        aborted_ = true;
        cv_.notify_all();
        throw;
      }
      arrived_ = 0;
      departed_ = 0;
      draining_ = true;
      ++generation_;
      cv_.notify_all();
    } else {
      const std::uint64_t gen = generation_;
      cv_.wait(lock, [&] { return generation_ != gen || aborted_; });
      if (aborted_) throw GroupAborted();
    }
    T out = shared_result;
    if (++departed_ == n_) {
      draining_ = false;
      for (auto& s : slots) s = T{};
      cv_.notify_all();
    }
    return out;
  }

  int n_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int arrived_{0};
  int departed_{0};
  bool draining_{false};
  bool aborted_{false};
  std::uint64_t generation_{0};
  std::vector<MomentImage> moment_slots_;
  std::vector<ColorImage> color_slots_;
  MomentImage moment_result_;
  ColorImage color_result_;
  CommStats stats_;
};

}  // namespace apc
