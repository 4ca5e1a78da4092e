#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rbguard/error.hpp"
#include "rbguard/rb_estimator.hpp"

namespace rbguard::mdn {

inline constexpr int features_per_service = 8;
inline constexpr const char* model_magic = "rbguard-mdn";
inline constexpr int model_version = 1;

// Feed-forward network mapping 8 features per service to 3*K mixture
// parameters per service, laid out [logits(K) | means(K) | log-stddevs(K)].
struct MdnModel {
  int n_services = 1;
  int k = 3;
  // Output widths of each layer; the last one equals 3*k*n_services.
  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  // Inputs are standardized as (x - input_mean) / input_scale.
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  double sigma_min = 1e-3;
  double sigma_max = 60.0;  // upper clamp, set to the cell size in RBs

  int input_dim() const { return features_per_service * n_services; }
  int output_dim() const { return 3 * k * n_services; }
};

inline std::vector<int> default_widths(int n_services, int k) { return {256, 256, 64, 3 * k * n_services}; }

// Model with every parameter zero and identity input scaling.
inline MdnModel zero_model(int n_services, int k, std::vector<int> widths, double sigma_max = 60.0) {
  MdnModel m;
  m.n_services = n_services;
  m.k = k;
  m.widths = std::move(widths);
  m.sigma_max = sigma_max;
  if (m.widths.empty() || m.widths.back() != m.output_dim())
    throw error(errc::shape_mismatch, "last layer width must be 3*K*|M|");
  int fan_in = m.input_dim();
  for (int w : m.widths) {
    m.weights.push_back(Eigen::MatrixXd::Zero(w, fan_in));
    m.biases.push_back(Eigen::VectorXd::Zero(w));
    fan_in = w;
  }
  m.input_mean = Eigen::VectorXd::Zero(m.input_dim());
  m.input_scale = Eigen::VectorXd::Ones(m.input_dim());
  return m;
}

// Kernels drawn from N(0, 2/fan_in); biases zero.
inline void he_normal_init(MdnModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& w : m.weights) {
    std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = d(rng);
  }
  for (auto& b : m.biases) b.setZero();
}

namespace detail {

struct Activations {
  // pre[l] = W_l a[l] + b_l; a[0] is the standardized input.
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::MatrixXd> pre;
};

inline Activations forward_batch(const MdnModel& m, const Eigen::MatrixXd& x) {
  Activations act;
  act.a.push_back(((x.colwise() - m.input_mean).array().colwise() / m.input_scale.array()).matrix());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::MatrixXd z = (m.weights[l] * act.a.back()).colwise() + m.biases[l];
    act.pre.push_back(z);
    if (l + 1 < m.weights.size()) act.a.push_back(z.cwiseMax(0.0));
  }
  return act;
}

inline double clamp_sigma(const MdnModel& m, double raw, bool* clamped = nullptr) {
  double s = std::exp(std::min(raw, 700.0));
  bool c = s < m.sigma_min || s > m.sigma_max;
  if (clamped) *clamped = c;
  return std::clamp(s, m.sigma_min, m.sigma_max);
}

inline Gmm decode(const MdnModel& m, const Eigen::Ref<const Eigen::VectorXd>& out, int service) {
  const int base = 3 * m.k * service;
  Gmm g(static_cast<std::size_t>(m.k));
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m.k; ++j) mx = std::max(mx, out(base + j));
  double z = 0;
  for (int j = 0; j < m.k; ++j) z += std::exp(out(base + j) - mx);
  for (int j = 0; j < m.k; ++j) {
    g[j].weight = std::exp(out(base + j) - mx) / z;
    g[j].mean = out(base + m.k + j);
    g[j].stddev = clamp_sigma(m, out(base + 2 * m.k + j));
  }
  return g;
}

// NLL of label y under the mixture decoded from raw outputs, and its gradient
// with respect to those raw outputs (written into grad).
inline double mixture_nll(const MdnModel& m, const Eigen::Ref<const Eigen::VectorXd>& out, int service, double y,
                          Eigen::Ref<Eigen::VectorXd> grad) {
  const int base = 3 * m.k * service;
  const int k = m.k;
  std::vector<double> logw(k), mu(k), sig(k), logp(k);
  std::vector<bool> clamped(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) mx = std::max(mx, out(base + j));
  double z = 0;
  for (int j = 0; j < k; ++j) z += std::exp(out(base + j) - mx);
  const double logz = mx + std::log(z);
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lse_max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    logw[j] = out(base + j) - logz;
    mu[j] = out(base + k + j);
    bool c = false;
    sig[j] = clamp_sigma(m, out(base + 2 * k + j), &c);
    clamped[j] = c;
    const double r = (y - mu[j]) / sig[j];
    logp[j] = logw[j] - std::log(sig[j]) - half_log_2pi - 0.5 * r * r;
    lse_max = std::max(lse_max, logp[j]);
  }
  double s = 0;
  for (int j = 0; j < k; ++j) s += std::exp(logp[j] - lse_max);
  const double log_lik = lse_max + std::log(s);
  for (int j = 0; j < k; ++j) {
    const double gamma = std::exp(logp[j] - log_lik);
    const double w = std::exp(logw[j]);
    const double r = (y - mu[j]) / sig[j];
    grad(base + j) += w - gamma;
    grad(base + k + j) += -gamma * r / sig[j];
    grad(base + 2 * k + j) += clamped[j] ? 0.0 : gamma * (1.0 - r * r);
  }
  return -log_lik;
}

}  // namespace detail

inline GmmParams mdn_forward(const MdnModel& m, std::span<const double> features) {
  if (static_cast<int>(features.size()) != m.input_dim())
    throw error(errc::shape_mismatch, "expected " + std::to_string(m.input_dim()) + " features, got " +
                                          std::to_string(features.size()));
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  auto act = detail::forward_batch(m, x);
  const Eigen::VectorXd out = act.pre.back().col(0);
  GmmParams g;
  for (int s = 0; s < m.n_services; ++s) g.push_back(detail::decode(m, out, s));
  return g;
}

// Labels are realized extra-RB counts per service; NaN marks a service that
// had no sample for this row.
struct MdnSample {
  std::vector<double> features;
  std::vector<double> labels;
};

// Mean (over rows) summed-over-services mixture NLL, and optionally its
// gradient with respect to every weight and bias.
struct LossAndGrad {
  double loss = 0;
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
};

inline LossAndGrad mdn_loss(const MdnModel& m, std::span<const MdnSample> rows, bool with_grad = true,
                            double label_jitter = 0.0, std::mt19937_64* rng = nullptr) {
  LossAndGrad r;
  if (rows.empty()) return r;
  const Eigen::Index b = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(m.input_dim(), b);
  for (Eigen::Index c = 0; c < b; ++c) {
    if (static_cast<int>(rows[c].features.size()) != m.input_dim())
      throw error(errc::shape_mismatch, "feature row width mismatch");
    x.col(c) = Eigen::Map<const Eigen::VectorXd>(rows[c].features.data(), m.input_dim());
  }
  auto act = detail::forward_batch(m, x);
  const Eigen::MatrixXd& out = act.pre.back();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  std::uniform_real_distribution<double> jitter(-label_jitter, label_jitter);
  double total = 0;
  for (Eigen::Index c = 0; c < b; ++c) {
    for (int s = 0; s < m.n_services; ++s) {
      double y = rows[c].labels[s];
      if (std::isnan(y)) continue;
      if (label_jitter > 0 && rng) y += jitter(*rng);
      Eigen::VectorXd col = out.col(c);
      Eigen::VectorXd gc = Eigen::VectorXd::Zero(out.rows());
      total += detail::mixture_nll(m, col, s, y, gc);
      g.col(c) += gc;
    }
  }
  r.loss = total / static_cast<double>(b);
  if (!with_grad) return r;
  g /= static_cast<double>(b);
  const std::size_t nl = m.weights.size();
  r.d_weights.resize(nl);
  r.d_biases.resize(nl);
  Eigen::MatrixXd delta = g;
  for (std::size_t l = nl; l-- > 0;) {
    r.d_weights[l] = delta * act.a[l].transpose();
    r.d_biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = m.weights[l].transpose() * delta;
      delta = back.cwiseProduct((act.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return r;
}

struct TrainParams {
  int k = 3;
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  // Half-width of uniform noise added to integer labels per draw (0 = off).
  double label_jitter = 0.0;
  double sigma_max = 60.0;  // upper clamp, set to the cell size in RBs
  std::vector<int> widths;  // empty -> default_widths
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
};

// Deterministic 70/30 style split: rows are shuffled by seed, the first
// train_fraction go to training.
inline std::pair<std::vector<MdnSample>, std::vector<MdnSample>> split_dataset(std::span<const MdnSample> data,
                                                                               double train_fraction,
                                                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size());
  std::vector<MdnSample> train, val;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? train : val).push_back(data[idx[i]]);
  if (val.empty()) val = train;
  return {std::move(train), std::move(val)};
}

// Linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// The model training starts from: He-normal kernels, input scaling fitted
// to the training rows, and output biases that place the components at
// label quantiles with widths from the label spread (zero biases would put
// every component at 0 RBs and leave Adam a long walk).
inline MdnModel initial_model(std::span<const MdnSample> train, int n_services, const TrainParams& p) {
  auto widths = p.widths.empty() ? default_widths(n_services, p.k) : p.widths;
  MdnModel m = zero_model(n_services, p.k, widths, p.sigma_max);
  he_normal_init(m, p.seed);
  const int d = m.input_dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  for (const auto& r : train) {
    if (static_cast<int>(r.features.size()) != d) throw error(errc::shape_mismatch, "feature row width mismatch");
    Eigen::Map<const Eigen::VectorXd> v(r.features.data(), d);
    mean += v;
    sq += v.cwiseProduct(v);
  }
  const double n = static_cast<double>(train.size());
  mean /= n;
  Eigen::VectorXd var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
  m.input_mean = mean;
  m.input_scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });

  auto& out_bias = m.biases.back();
  for (int s = 0; s < n_services; ++s) {
    std::vector<double> y;
    for (const auto& r : train)
      if (static_cast<std::size_t>(s) < r.labels.size() && std::isfinite(r.labels[s])) y.push_back(r.labels[s]);
    if (y.empty()) continue;
    const double mu = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss = 0;
    for (double v : y) ss += (v - mu) * (v - mu);
    const double spread = std::sqrt(ss / static_cast<double>(y.size())) / p.k;
    const int base = 3 * p.k * s;
    for (int j = 0; j < p.k; ++j) {
      out_bias(base + p.k + j) = percentile(y, (j + 0.5) / p.k);
      out_bias(base + 2 * p.k + j) = std::log(std::clamp(spread, 1.0, m.sigma_max));
    }
  }
  return m;
}

inline MdnModel mdn_train(std::span<const MdnSample> data, int n_services, const TrainParams& p,
                          TrainReport* report = nullptr) {
  if (data.empty()) throw error(errc::empty_dataset, "no training rows");
  for (const auto& r : data)
    if (static_cast<int>(r.labels.size()) != n_services) throw error(errc::shape_mismatch, "label row width");
  auto [train, val] = split_dataset(data, p.train_fraction, p.seed);
  MdnModel model = initial_model(train, n_services, p);
  if (p.epochs <= 0) return model;

  const std::size_t nl = model.weights.size();
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < nl; ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    vb.push_back(mb.back());
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  MdnModel best = model;
  double best_val = mdn_loss(model, val, false).loss;
  if (report) report->best_epoch = 0;
  long step = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<MdnSample> batch;
  for (int epoch = 1; epoch <= p.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(p.batch_size)) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + p.batch_size); ++i)
        batch.push_back(train[order[i]]);
      auto lg = mdn_loss(model, batch, true, p.label_jitter, &rng);
      if (!std::isfinite(lg.loss)) throw error(errc::diverged_loss, "non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += lg.loss;
      ++batches;
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < nl; ++l) {
        mw[l] = beta1 * mw[l] + (1 - beta1) * lg.d_weights[l];
        vw[l] = beta2 * vw[l] + (1 - beta2) * lg.d_weights[l].cwiseProduct(lg.d_weights[l]);
        model.weights[l].array() -=
            p.learning_rate * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
        mb[l] = beta1 * mb[l] + (1 - beta1) * lg.d_biases[l];
        vb[l] = beta2 * vb[l] + (1 - beta2) * lg.d_biases[l].cwiseProduct(lg.d_biases[l]);
        model.biases[l].array() -= p.learning_rate * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
      }
    }
    const double vl = mdn_loss(model, val, false).loss;
    if (!std::isfinite(vl)) throw error(errc::diverged_loss, "non-finite validation loss");
    if (report) {
      report->train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
      report->validation_loss.push_back(vl);
    }
    if (vl < best_val) {
      best_val = vl;
      best = model;
      if (report) report->best_epoch = epoch;
    }
  }
  return best;
}

// Mean RB use, incoming-bit and enqueued-bit quartiles over the last t_out
// TTIs before `end`, and the candidate guarantee, for every service in order.
inline std::vector<double> mdn_features(const EstimatorInput& in, std::span<const int> candidate,
                                        std::size_t end = std::numeric_limits<std::size_t>::max()) {
  std::vector<double> f;
  f.reserve(in.telemetry.size() * features_per_service);
  for (std::size_t s = 0; s < in.telemetry.size(); ++s) {
    const auto& t = in.telemetry[s];
    const std::size_t stop = std::min(end, t.granted_rbs.size());
    const std::size_t start = stop > static_cast<std::size_t>(in.t_out) ? stop - in.t_out : 0;
    std::vector<double> inc, enq;
    double util = 0;
    for (std::size_t i = start; i < stop; ++i) {
      util += t.granted_rbs[i];
      inc.push_back(static_cast<double>(t.incoming_bits[i]));
      enq.push_back(static_cast<double>(t.enqueued_bits[i]));
    }
    f.push_back(stop > start ? util / static_cast<double>(stop - start) : 0.0);
    for (double q : {0.25, 0.5, 0.75}) f.push_back(percentile(inc, q));
    for (double q : {0.25, 0.5, 0.75}) f.push_back(percentile(enq, q));
    f.push_back(static_cast<double>(candidate[s]));
  }
  return f;
}

class MdnEstimator final : public RbEstimator {
 public:
  explicit MdnEstimator(MdnModel model) : model_(std::move(model)) {}
  EstimatorKind kind() const override { return EstimatorKind::mdn; }
  std::vector<double> estimate(const EstimatorInput& in, std::span<const int> candidate, int m,
                               int n_add) const override {
    if (static_cast<int>(in.telemetry.size()) != model_.n_services)
      throw error(errc::shape_mismatch, "model trained for a different number of services");
    auto f = mdn_features(in, candidate);
    auto g = mdn_forward(model_, f);
    return region_probabilities(g[m], n_add);
  }
  const MdnModel& model() const { return model_; }

 private:
  MdnModel model_;
};

inline void save_model(std::ostream& out, const MdnModel& m) {
  out << std::setprecision(17);
  out << model_magic << ' ' << model_version << '\n';
  out << "services " << m.n_services << '\n' << "components " << m.k << '\n';
  out << "sigma " << m.sigma_min << ' ' << m.sigma_max << '\n';
  out << "widths " << m.widths.size();
  for (int w : m.widths) out << ' ' << w;
  out << '\n' << "input_mean";
  for (Eigen::Index i = 0; i < m.input_mean.size(); ++i) out << ' ' << m.input_mean(i);
  out << '\n' << "input_scale";
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) out << ' ' << m.input_scale(i);
  out << '\n';
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto& w = m.weights[l];
    out << "layer " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) out << (j ? " " : "") << w(i, j);
      out << '\n';
    }
    for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) out << (i ? " " : "") << m.biases[l](i);
    out << '\n';
  }
}

inline MdnModel load_model(std::istream& in) {
  auto fail = [](const std::string& what) -> MdnModel { throw error(errc::parse, "mdn model: " + what); };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != model_magic) return fail("bad magic");
  if (version != model_version) return fail("unsupported version " + std::to_string(version));
  MdnModel m;
  std::size_t n_layers = 0;
  if (!(in >> tag >> m.n_services) || tag != "services") return fail("services");
  if (!(in >> tag >> m.k) || tag != "components") return fail("components");
  if (!(in >> tag >> m.sigma_min >> m.sigma_max) || tag != "sigma") return fail("sigma");
  if (!(in >> tag >> n_layers) || tag != "widths") return fail("widths");
  m.widths.resize(n_layers);
  for (auto& w : m.widths)
    if (!(in >> w)) return fail("widths");
  MdnModel shaped = zero_model(m.n_services, m.k, m.widths, m.sigma_max);
  shaped.sigma_min = m.sigma_min;
  if (!(in >> tag) || tag != "input_mean") return fail("input_mean");
  for (Eigen::Index i = 0; i < shaped.input_mean.size(); ++i)
    if (!(in >> shaped.input_mean(i))) return fail("input_mean");
  if (!(in >> tag) || tag != "input_scale") return fail("input_scale");
  for (Eigen::Index i = 0; i < shaped.input_scale.size(); ++i)
    if (!(in >> shaped.input_scale(i))) return fail("input_scale");
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> idx >> rows >> cols) || tag != "layer" || idx != l) return fail("layer header");
    auto& w = shaped.weights[l];
    if (rows != w.rows() || cols != w.cols()) return fail("layer shape");
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        if (!(in >> w(i, j))) return fail("weights");
    for (Eigen::Index i = 0; i < rows; ++i)
      if (!(in >> shaped.biases[l](i))) return fail("biases");
  }
  return shaped;
}

// Training rows from a scheduler history: one row every `stride` TTIs once
// t_out TTIs of history exist. Service m is labelled with the extra RBs it
// had (cell minus its guarantee minus what the others used of theirs) when it
// needed more than its guarantee, NaN otherwise.
inline std::vector<MdnSample> mdn_dataset(std::span<const ServiceTelemetry> tel,
                                          std::span<const std::vector<int>> n_min, int n_cell_rb, int t_out,
                                          int stride = 1) {
  if (tel.empty() || tel.size() != n_min.size()) throw error(errc::shape_mismatch, "telemetry/guarantee mismatch");
  if (stride < 1 || t_out < 1) throw error(errc::config, "stride and t_out must be >= 1");
  const std::size_t n = tel.size(), len = tel[0].demand_rbs.size();
  std::vector<MdnSample> out;
  EstimatorInput in{n_cell_rb, t_out, tel};
  std::vector<int> cand(n);
  for (std::size_t i = static_cast<std::size_t>(t_out); i < len; i += static_cast<std::size_t>(stride)) {
    for (std::size_t m = 0; m < n; ++m) cand[m] = n_min[m][i];
    MdnSample row;
    row.features = mdn_features(in, cand, i);
    row.labels.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m < n; ++m) {
      if (tel[m].demand_rbs[i] <= cand[m]) continue;
      int others = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != m) others += std::min(tel[k].demand_rbs[i], cand[k]);
      row.labels[m] = std::max(0, n_cell_rb - cand[m] - others);
    }
    out.push_back(std::move(row));
  }
  return out;
}

// Dataset CSV: header f0..f{F-1},y0..y{M-1}; an empty label cell is absent.
inline void write_dataset(std::ostream& out, std::span<const MdnSample> rows) {
  if (rows.empty()) throw error(errc::empty_dataset, "nothing to write");
  const std::size_t f = rows[0].features.size(), l = rows[0].labels.size();
  for (std::size_t i = 0; i < f; ++i) out << (i ? "," : "") << 'f' << i;
  for (std::size_t i = 0; i < l; ++i) out << ",y" << i;
  out << '\n' << std::setprecision(9);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < f; ++i) out << (i ? "," : "") << r.features[i];
    for (double y : r.labels) {
      out << ',';
      if (!std::isnan(y)) out << y;
    }
    out << '\n';
  }
}

inline std::vector<MdnSample> read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw error(errc::empty_dataset, "dataset has no header");
  std::size_t f = 0, l = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (!col.empty() && col.back() == '\r') col.pop_back();
      if (col.size() > 1 && col[0] == 'f' && l == 0) ++f;
      else if (col.size() > 1 && col[0] == 'y') ++l;
      else throw error(errc::parse, "dataset header: unexpected column '" + col + "'");
    }
  }
  if (f == 0 || l == 0 || f != l * features_per_service)
    throw error(errc::shape_mismatch, "dataset needs " + std::to_string(features_per_service) +
                                          " feature columns per label column");
  std::vector<MdnSample> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    MdnSample r;
    std::stringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!cell.empty()) {
        try {
          std::size_t used = 0;
          v = std::stod(cell, &used);
          if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw parse_error(line_no, "dataset: bad number '" + cell + "'");
        }
      } else if (col < f) {
        throw parse_error(line_no, "dataset: empty feature");
      }
      (col < f ? r.features : r.labels).push_back(v);
      ++col;
    }
    // getline drops a trailing empty cell.
    if (line.back() == ',') {
      r.labels.push_back(std::numeric_limits<double>::quiet_NaN());
      ++col;
    }
    if (col != f + l) throw parse_error(line_no, "dataset: expected " + std::to_string(f + l) + " columns");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw error(errc::empty_dataset, "dataset has no rows");
  return rows;
}

}  // namespace rbguard::mdn
