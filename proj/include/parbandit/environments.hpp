#pragma once

// Reward oracles and context generation.  An Environment bundles an oracle
// (linear / fixed random network / tabular), a feature map, and a context
// generator; policies only ever see feature vectors and noisy rewards, while
// the metrics layer reads the noiseless values.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "parbandit/contexts.hpp"
#include "parbandit/features.hpp"
#include "parbandit/rng.hpp"

namespace parbandit {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Oracles

/// Noiseless f(x) = x . theta_star with additive Gaussian reward noise.
class LinearOracle {
 public:
  LinearOracle(Eigen::VectorXd theta_star, double noise_std, double param_bound = 1.0)
      : theta_star_(std::move(theta_star)), noise_std_(noise_std) {
    if (noise_std_ < 0.0) throw std::invalid_argument("LinearOracle: noise_std must be >= 0");
    if (theta_star_.norm() > param_bound * (1.0 + 1e-12))
      throw std::invalid_argument("LinearOracle: ||theta*|| exceeds the parameter bound");
  }

  /// theta* drawn standard normal and scaled to unit norm.
  static LinearOracle random_unit(Eigen::Index d, double noise_std, Stream stream) {
    Eigen::VectorXd theta = stream.normal_vector(d);
    theta /= theta.norm();
    return LinearOracle(std::move(theta), noise_std);
  }

  const Eigen::VectorXd& theta_star() const { return theta_star_; }
  double noise_std() const { return noise_std_; }

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const { return x.dot(theta_star_); }
  double reward(const Eigen::Ref<const Eigen::VectorXd>& x, Stream& stream) const {
    return value(x) + noise_std_ * stream.normal();
  }

 private:
  Eigen::VectorXd theta_star_;
  double noise_std_;
};

/// Fully-connected ReLU network with frozen random weights and no biases;
/// the scalar output defines the noiseless arm value.
class NeuralOracle {
 public:
  /// Weights drawn uniform on +-sqrt(6 / (fan_in + fan_out)), layer by layer
  /// in row-major order from the given stream.
  static NeuralOracle xavier(const std::vector<Eigen::Index>& layer_sizes, double noise_std,
                             Stream stream) {
    if (layer_sizes.size() < 2)
      throw std::invalid_argument("NeuralOracle: need at least input and output layer sizes");
    std::vector<Eigen::MatrixXd> weights;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const Eigen::Index fan_in = layer_sizes[l];
      const Eigen::Index fan_out = layer_sizes[l + 1];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Stream layer = stream.child("layer", static_cast<std::uint64_t>(l));
      Eigen::MatrixXd w(fan_out, fan_in);
      for (Eigen::Index i = 0; i < fan_out; ++i)
        for (Eigen::Index j = 0; j < fan_in; ++j) w(i, j) = (2.0 * layer.uniform() - 1.0) * bound;
      weights.push_back(std::move(w));
    }
    return NeuralOracle(std::move(weights), noise_std);
  }

  /// Default architecture: 14 binary inputs, hidden widths 128/256/512,
  /// scalar output.
  static NeuralOracle default_random(double noise_std, Stream stream) {
    return xavier({14, 128, 256, 512, 1}, noise_std, std::move(stream));
  }

  NeuralOracle(std::vector<Eigen::MatrixXd> weights, double noise_std)
      : weights_(std::move(weights)), noise_std_(noise_std) {
    if (weights_.empty()) throw std::invalid_argument("NeuralOracle: no layers");
    if (noise_std_ < 0.0) throw std::invalid_argument("NeuralOracle: noise_std must be >= 0");
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l)
      if (weights_[l + 1].cols() != weights_[l].rows())
        throw std::invalid_argument("NeuralOracle: layer shape mismatch");
    if (weights_.back().rows() != 1)
      throw std::invalid_argument("NeuralOracle: output layer must be scalar");
  }

  Eigen::Index input_dim() const { return weights_.front().cols(); }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  double noise_std() const { return noise_std_; }

  /// ReLU on every hidden layer, linear scalar output.
  double forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != input_dim()) throw std::invalid_argument("NeuralOracle: input length mismatch");
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l)
      h = (weights_[l] * h).cwiseMax(0.0);
    return (weights_.back() * h).value();
  }

  /// forward() over every row of X.
  Eigen::VectorXd forward_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    if (X.cols() != input_dim()) throw std::invalid_argument("NeuralOracle: input length mismatch");
    Eigen::MatrixXd h = X;
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l)
      h = (h * weights_[l].transpose()).cwiseMax(0.0);
    return h * weights_.back().transpose();
  }

  double reward(const Eigen::Ref<const Eigen::VectorXd>& x, Stream& stream) const {
    return forward(x) + noise_std_ * stream.normal();
  }

 private:
  std::vector<Eigen::MatrixXd> weights_;
  double noise_std_;
};

/// Finite arm list with a stored value per arm.
class TabularOracle {
 public:
  TabularOracle(Eigen::MatrixXd arms, Eigen::VectorXd values, double noise_std,
                std::vector<std::string> feature_names = {}, std::string value_name = "value")
      : arms_(std::move(arms)),
        values_(std::move(values)),
        noise_std_(noise_std),
        feature_names_(std::move(feature_names)),
        value_name_(std::move(value_name)) {
    if (arms_.rows() != values_.size())
      throw std::invalid_argument("TabularOracle: one value per arm required");
    if (arms_.rows() == 0) throw std::invalid_argument("TabularOracle: no arms");
    if (noise_std_ < 0.0) throw std::invalid_argument("TabularOracle: noise_std must be >= 0");
    if (feature_names_.empty())
      for (Eigen::Index j = 0; j < arms_.cols(); ++j)
        feature_names_.push_back("f" + std::to_string(j));
    if (static_cast<Eigen::Index>(feature_names_.size()) != arms_.cols())
      throw std::invalid_argument("TabularOracle: one name per feature column required");
  }

  Eigen::Index arm_count() const { return arms_.rows(); }
  const Eigen::MatrixXd& arms() const { return arms_; }
  const Eigen::VectorXd& values() const { return values_; }
  double noise_std() const { return noise_std_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::string& value_name() const { return value_name_; }

  double value(Eigen::Index arm) const {
    if (arm < 0 || arm >= arms_.rows()) throw std::invalid_argument("TabularOracle: arm out of range");
    return values_[arm];
  }
  double reward(Eigen::Index arm, Stream& stream) const {
    return value(arm) + noise_std_ * stream.normal();
  }

  /// Shifts every feature column to zero mean / unit population deviation
  /// (columns with zero spread are only centered).
  void standardize_features() {
    for (Eigen::Index j = 0; j < arms_.cols(); ++j) {
      const double mean = arms_.col(j).mean();
      arms_.col(j).array() -= mean;
      const double sd = std::sqrt(arms_.col(j).squaredNorm() / static_cast<double>(arms_.rows()));
      if (sd > 0.0) arms_.col(j) /= sd;
    }
  }

 private:
  Eigen::MatrixXd arms_;
  Eigen::VectorXd values_;
  double noise_std_;
  std::vector<std::string> feature_names_;
  std::string value_name_;
};

// ---------------------------------------------------------------------------
// CSV design matrices

/// Which columns of a CSV feed the feature matrix.
struct ColumnSelection {
  enum class Mode { AllButValue, Names, IndexRange } mode = Mode::AllButValue;
  std::vector<std::string> names;
  int range_first = 0, range_last = -1;  // inclusive, 0-based

  static ColumnSelection all() { return {}; }
  static ColumnSelection by_names(std::vector<std::string> n) {
    return {Mode::Names, std::move(n), 0, -1};
  }
  static ColumnSelection by_range(int first, int last) { return {Mode::IndexRange, {}, first, last}; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view cell =
        comma == std::string_view::npos ? line.substr(start) : line.substr(start, comma - start);
    cells.emplace_back(trim(cell));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path, std::size_t data_row,
                         const std::string& column) {
  double out = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw CsvError(path + ": data row " + std::to_string(data_row) + ", column '" + column +
                   "': cannot parse '" + cell + "' as a number");
  return out;
}

}  // namespace detail

/// Loads a header-plus-rows numeric CSV into a TabularOracle.  Data rows are
/// numbered from 1 (the header is row 0) in every diagnostic.
inline TabularOracle load_tabular_csv(const std::string& path, const std::string& value_column,
                                      double noise_std,
                                      const ColumnSelection& selection = ColumnSelection::all(),
                                      bool standardize = false) {
  std::ifstream in(path);
  if (!in) throw CsvError(path + ": cannot open file");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw CsvError(path + ": empty file");

  const std::vector<std::string> header = detail::split_csv_line(lines.front());
  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw CsvError(path + ": column '" + name + "' not found");
  };

  const std::size_t value_idx = column_index(value_column);
  std::vector<std::size_t> feature_idx;
  switch (selection.mode) {
    case ColumnSelection::Mode::AllButValue:
      for (std::size_t j = 0; j < header.size(); ++j)
        if (j != value_idx) feature_idx.push_back(j);
      break;
    case ColumnSelection::Mode::Names:
      for (const auto& name : selection.names) feature_idx.push_back(column_index(name));
      break;
    case ColumnSelection::Mode::IndexRange:
      if (selection.range_first < 0 || selection.range_last >= static_cast<int>(header.size()) ||
          selection.range_first > selection.range_last)
        throw CsvError(path + ": feature column range out of bounds");
      for (int j = selection.range_first; j <= selection.range_last; ++j)
        feature_idx.push_back(static_cast<std::size_t>(j));
      break;
  }
  if (feature_idx.empty()) throw CsvError(path + ": no feature columns selected");

  const std::size_t rows = lines.size() - 1;
  if (rows == 0) throw CsvError(path + ": no data rows");
  Eigen::MatrixXd arms(rows, feature_idx.size());
  Eigen::VectorXd values(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<std::string> cells = detail::split_csv_line(lines[r + 1]);
    if (cells.size() != header.size())
      throw CsvError(path + ": data row " + std::to_string(r + 1) + ": expected " +
                     std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < feature_idx.size(); ++c)
      arms(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          detail::parse_cell(cells[feature_idx[c]], path, r + 1, header[feature_idx[c]]);
    values[static_cast<Eigen::Index>(r)] =
        detail::parse_cell(cells[value_idx], path, r + 1, header[value_idx]);
  }

  std::vector<std::string> names;
  for (std::size_t j : feature_idx) names.push_back(header[j]);
  TabularOracle oracle(std::move(arms), std::move(values), noise_std, std::move(names),
                       value_column);
  if (standardize) oracle.standardize_features();
  return oracle;
}

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  out.append(buf, ptr);
}

}  // namespace detail

/// Inverse of load_tabular_csv: shortest round-trip number formatting, so a
/// reload reproduces the oracle bit for bit.
inline void write_tabular_csv(const TabularOracle& oracle, const std::string& path) {
  std::string out;
  for (const auto& name : oracle.feature_names()) {
    out += name;
    out += ',';
  }
  out += oracle.value_name();
  out += '\n';
  for (Eigen::Index r = 0; r < oracle.arm_count(); ++r) {
    for (Eigen::Index c = 0; c < oracle.arms().cols(); ++c) {
      detail::append_number(out, oracle.arms()(r, c));
      out += ',';
    }
    detail::append_number(out, oracle.values()[r]);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error(path + ": write failed");
}

/// Synthesizes a regression-design CSV in the shape of real materials data:
/// heterogeneous column scales, a positive heavy-tailed target, header row
/// "f0..f{d-1},target".
inline void fabricate_design_csv(const std::string& path, Eigen::Index rows, Eigen::Index cols,
                                 std::uint64_t key) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("fabricate_design_csv: rows and cols must be positive");
  Stream stream(seed_stream(key, "design_csv"));
  Eigen::VectorXd col_scale(cols);
  // Lognormal column scales so features span orders of magnitude, the way
  // mixed physical units do.
  for (Eigen::Index j = 0; j < cols; ++j) col_scale[j] = std::exp(1.5 * stream.normal());
  Eigen::VectorXd w = stream.normal_vector(cols) / std::sqrt(static_cast<double>(cols));
  Eigen::MatrixXd arms(rows, cols);
  Eigen::VectorXd values(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::VectorXd z = stream.normal_vector(cols);
    arms.row(r) = (z.array() * col_scale.array()).transpose();
    const double signal = (z.array() * w.array()).sum();
    values[r] = 20.0 * std::log1p(std::exp(signal)) * std::exp(0.5 * stream.normal());
  }
  TabularOracle oracle(std::move(arms), std::move(values), 0.0, {}, "target");
  write_tabular_csv(oracle, path);
}

// ---------------------------------------------------------------------------
// Context generation

enum class ContextMode { FixedGlobal, ChangingPerStep, TabularGlobal };

/// Produces the decision sets shown to the processors.  Synthetic arms are
/// iid standard normal rows (optionally unit-normalized); the fixed mode
/// memoizes one global draw, the changing mode keys a fresh draw on (t, p).
class ContextGenerator {
 public:
  static ContextGenerator fixed_global(Eigen::Index m, Eigen::Index d, bool normalize,
                                       std::uint64_t key) {
    ContextGenerator g(ContextMode::FixedGlobal, m, d, normalize, key);
    g.fixed_ = g.draw(0, 0);
    return g;
  }

  static ContextGenerator changing(Eigen::Index m, Eigen::Index d, bool normalize,
                                   std::uint64_t key) {
    return ContextGenerator(ContextMode::ChangingPerStep, m, d, normalize, key);
  }

  /// Wraps an externally supplied global arm list (e.g. a design matrix).
  static ContextGenerator tabular(Eigen::MatrixXd arms) {
    if (arms.rows() == 0 || arms.cols() == 0)
      throw std::invalid_argument("ContextGenerator: arm list must be nonempty");
    ContextGenerator g(ContextMode::TabularGlobal, arms.rows(), arms.cols(), false, 0);
    g.fixed_ = std::move(arms);
    return g;
  }

  ContextMode mode() const { return mode_; }
  Eigen::Index arm_count() const { return m_; }
  Eigen::Index dim() const { return d_; }
  bool fixed() const { return mode_ != ContextMode::ChangingPerStep; }

  /// The memoized global list (fixed modes only).
  const Eigen::MatrixXd& fixed_arms() const {
    if (!fixed()) throw std::logic_error("ContextGenerator: no global list in changing mode");
    return fixed_;
  }

  /// Decision set for processor p at round t; a pure function of (key, t, p).
  Eigen::MatrixXd gen_context(std::int64_t t, int p) const {
    if (fixed()) return fixed_;
    return draw(t, p);
  }

  /// One batch of P decision sets, sharing storage in fixed modes.
  RoundContexts round_contexts(std::int64_t t, int processors) const {
    if (fixed()) return RoundContexts::shared(fixed_, processors, true);
    std::vector<Eigen::MatrixXd> per_p;
    per_p.reserve(static_cast<std::size_t>(processors));
    for (int p = 1; p <= processors; ++p) per_p.push_back(draw(t, p));
    return RoundContexts::owned(std::move(per_p));
  }

 private:
  ContextGenerator(ContextMode mode, Eigen::Index m, Eigen::Index d, bool normalize,
                   std::uint64_t key)
      : mode_(mode), m_(m), d_(d), normalize_(normalize), key_(key) {
    if (m_ <= 0) throw std::invalid_argument("ContextGenerator: arm count must be positive");
    if (d_ <= 0) throw std::invalid_argument("ContextGenerator: dimension must be positive");
  }

  Eigen::MatrixXd draw(std::int64_t t, int p) const {
    Stream stream(seed_stream(key_, "context", t, static_cast<std::uint64_t>(p)));
    Eigen::MatrixXd arms(m_, d_);
    for (Eigen::Index i = 0; i < m_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j) arms(i, j) = stream.normal();
    if (normalize_)
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double n = arms.row(i).norm();
        if (n > 0.0) arms.row(i) /= n;
      }
    return arms;
  }

  ContextMode mode_;
  Eigen::Index m_;
  Eigen::Index d_;
  bool normalize_;
  std::uint64_t key_;
  Eigen::MatrixXd fixed_;
};

// ---------------------------------------------------------------------------
// Environment: oracle + features + contexts

/// Everything a simulation needs from the outside world.  Policies receive
/// feature-space contexts; rewards are noiseless values plus N(0, noise^2).
class Environment {
 public:
  static Environment synthetic_linear(Eigen::Index d, Eigen::Index m, ContextMode mode,
                                      double noise_std, bool normalize, std::uint64_t key) {
    Environment env;
    Stream stream{seed_stream(key, "env")};
    env.linear_ = LinearOracle::random_unit(d, noise_std, stream.child("theta"));
    env.generator_ = mode == ContextMode::FixedGlobal
                         ? ContextGenerator::fixed_global(m, d, normalize, stream.child("arms").key())
                         : ContextGenerator::changing(m, d, normalize, stream.child("arms").key());
    env.noise_std_ = noise_std;
    env.finish_values();
    return env;
  }

  /// Arms are all length-14 binary sequences (bit j of the row index gives
  /// column j), or a uniform subset when subset_m is smaller.
  static Environment fixed_network(const FeatureScheme& scheme, Eigen::Index subset_m,
                                   double noise_std, std::uint64_t key) {
    Environment env;
    Stream stream{seed_stream(key, "env")};
    env.neural_ = NeuralOracle::default_random(noise_std, stream.child("weights"));
    const Eigen::Index full = Eigen::Index(1) << 14;
    if (subset_m <= 0 || subset_m > full) subset_m = full;
    std::vector<std::int64_t> rows(static_cast<std::size_t>(full));
    for (std::int64_t i = 0; i < full; ++i) rows[static_cast<std::size_t>(i)] = i;
    if (subset_m < full) {  // partial Fisher-Yates, deterministic in the key
      Stream pick = stream.child("subset");
      for (Eigen::Index i = 0; i < subset_m; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(pick.uniform_below(
                           static_cast<std::uint64_t>(full - i)));
        std::swap(rows[static_cast<std::size_t>(i)], rows[j]);
      }
      rows.resize(static_cast<std::size_t>(subset_m));
    }
    Eigen::MatrixXd raw(subset_m, 14);
    for (Eigen::Index r = 0; r < subset_m; ++r)
      for (Eigen::Index b = 0; b < 14; ++b)
        raw(r, b) = (rows[static_cast<std::size_t>(r)] >> b) & 1;
    env.raw_arms_ = raw;
    env.generator_ = ContextGenerator::tabular(expand_features(raw, scheme));
    env.values_ = env.neural_->forward_rows(raw);
    env.noise_std_ = noise_std;
    return env;
  }

  static Environment tabular(TabularOracle oracle, const FeatureScheme& scheme = {}) {
    Environment env;
    env.noise_std_ = oracle.noise_std();
    env.values_ = oracle.values();
    env.raw_arms_ = oracle.arms();
    env.generator_ = ContextGenerator::tabular(expand_features(oracle.arms(), scheme));
    env.tabular_ = std::move(oracle);
    return env;
  }

  Eigen::Index dim() const { return generator_->dim(); }
  Eigen::Index arm_count() const { return generator_->arm_count(); }
  bool fixed_global() const { return generator_->fixed(); }
  double noise_std() const { return noise_std_; }
  const ContextGenerator& generator() const { return *generator_; }
  const LinearOracle& linear_oracle() const { return *linear_; }
  const NeuralOracle& neural_oracle() const { return *neural_; }
  const TabularOracle& tabular_oracle() const { return *tabular_; }

  /// Largest arm norm in the global list (fixed modes).
  double max_arm_norm() const { return generator_->fixed_arms().rowwise().norm().maxCoeff(); }

  RoundContexts round_contexts(std::int64_t t, int processors) const {
    return generator_->round_contexts(t, processors);
  }

  /// Noiseless values aligned with the rows of the processor-p decision set.
  Eigen::VectorXd context_values(const RoundContexts& rc, int p) const {
    if (fixed_global()) return values_;
    return rc.at(p) * linear_->theta_star();  // changing mode is linear-only
  }

  /// Noisy reward for a noiseless value; one normal per query.
  double reward_from_value(double value, Stream& stream) const {
    return value + noise_std_ * stream.normal();
  }

 private:
  void finish_values() {
    if (generator_->fixed()) values_ = generator_->fixed_arms() * linear_->theta_star();
  }

  std::optional<LinearOracle> linear_;
  std::optional<NeuralOracle> neural_;
  std::optional<TabularOracle> tabular_;
  std::optional<ContextGenerator> generator_;
  Eigen::MatrixXd raw_arms_;
  Eigen::VectorXd values_;
  double noise_std_ = 0.0;
};

}  // namespace parbandit
