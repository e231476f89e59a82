#pragma once

// A round's worth of decision sets: one arm matrix (row per arm) for each of
// the P processors.  When every processor sees the same global set the batch
// stores a single view, so policies can detect the shared case and score once.

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace parbandit {

class RoundContexts {
 public:
  /// All processors share one arm matrix owned elsewhere.
  static RoundContexts shared(const Eigen::MatrixXd& arms, int processors, bool fixed_global) {
    if (processors < 1) throw std::invalid_argument("RoundContexts: processors must be >= 1");
    RoundContexts rc;
    rc.views_.assign(static_cast<std::size_t>(processors), &arms);
    rc.fixed_global_ = fixed_global;
    return rc;
  }

  /// One freshly drawn arm matrix per processor (storage moves in).
  static RoundContexts owned(std::vector<Eigen::MatrixXd> per_processor) {
    if (per_processor.empty()) throw std::invalid_argument("RoundContexts: processors must be >= 1");
    RoundContexts rc;
    rc.storage_ = std::move(per_processor);
    rc.views_.reserve(rc.storage_.size());
    for (const auto& m : rc.storage_) rc.views_.push_back(&m);
    rc.fixed_global_ = false;
    return rc;
  }

  int processors() const { return static_cast<int>(views_.size()); }
  const Eigen::MatrixXd& at(int p) const { return *views_.at(static_cast<std::size_t>(p)); }
  bool fixed_global() const { return fixed_global_; }

  /// True when every processor's view aliases the same matrix.
  bool shared_across_processors() const {
    for (const auto* v : views_)
      if (v != views_.front()) return false;
    return true;
  }

 private:
  std::vector<Eigen::MatrixXd> storage_;
  std::vector<const Eigen::MatrixXd*> views_;
  bool fixed_global_ = false;
};

}  // namespace parbandit
