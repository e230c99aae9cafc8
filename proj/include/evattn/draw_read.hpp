#pragma once

// Gaussian filterbank attention.
//
// Five parameters place an N x N grid of isotropic Gaussian filters on the
// frame; the attended patch is gamma * F_Y * frame * F_X^T, where each row of
// F_Y (N x H) and F_X (N x W) is one normalised 1-D filter. The construction
// follows DRAW:
//
//   g_x   = (W + 1) / 2 * (gx_tilde + 1)          (g_y likewise with H)
//   delta = (max(W, H) - 1) / (N - 1) * exp(log_delta)   (0 when N == 1)
//   mu_i  = g + (i + 0.5 - N / 2) * delta          i = 0 .. N-1
//   F[i][a] = exp(-(a - mu_i)^2 / (2 sigma^2)) / Z_i,  sigma^2 = exp(log_var)
//   gamma = exp(log_gamma)
//
// Pixel coordinates a are 0-based. A row whose Gaussian underflows to zero on
// every pixel stays all-zero instead of being renormalised.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evattn/error.hpp"
#include "evattn/event_io.hpp"
#include "evattn/integrator.hpp"

namespace evattn {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Attention parameters; also used as the container for their gradients.
struct AttentionParams {
  double gx_tilde = 0.0;
  double gy_tilde = 0.0;
  double log_var = 0.0;
  double log_delta = 0.0;
  double log_gamma = 0.0;

  static constexpr std::size_t kCount = 5;

  double& operator[](std::size_t i) {
    switch (i) {
      case 0: return gx_tilde;
      case 1: return gy_tilde;
      case 2: return log_var;
      case 3: return log_delta;
      default: return log_gamma;
    }
  }
  double operator[](std::size_t i) const { return const_cast<AttentionParams&>(*this)[i]; }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

struct FilterBank {
  int n = 0;
  StreamHeader geometry;
  Matrix fy;  // n x height
  Matrix fx;  // n x width
  std::vector<double> mu_y;
  std::vector<double> mu_x;
  std::vector<double> mass_y;  // pre-normalisation row sums
  std::vector<double> mass_x;
  double gx = 0.0;
  double gy = 0.0;
  double delta = 0.0;
  double variance = 1.0;
  double gamma = 1.0;
};

namespace detail {

inline void fill_filters(Matrix& f, std::vector<double>& mu, std::vector<double>& mass, double centre,
                         double delta, double variance, int n, int extent) {
  f = Matrix(n, extent);
  mu.assign(static_cast<std::size_t>(n), 0.0);
  mass.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double m = centre + (i + 0.5 - n / 2.0) * delta;
    mu[static_cast<std::size_t>(i)] = m;
    double z = 0.0;
    for (int a = 0; a < extent; ++a) {
      const double d = a - m;
      const double v = std::exp(-d * d / (2.0 * variance));
      f(i, a) = v;
      z += v;
    }
    mass[static_cast<std::size_t>(i)] = z;
    if (z > 0.0)
      for (int a = 0; a < extent; ++a) f(i, a) /= z;
  }
}

inline double grid_span(const StreamHeader& g) { return std::max(g.width, g.height) - 1.0; }

}  // namespace detail

inline FilterBank build_filterbank(const AttentionParams& p, const StreamHeader& geometry, int n) {
  validate_header(geometry);
  if (n < 1) throw ValidationError("filterbank size must be positive");
  FilterBank fb;
  fb.n = n;
  fb.geometry = geometry;
  fb.gx = (geometry.width + 1) / 2.0 * (p.gx_tilde + 1.0);
  fb.gy = (geometry.height + 1) / 2.0 * (p.gy_tilde + 1.0);
  fb.delta = n > 1 ? detail::grid_span(geometry) / (n - 1) * std::exp(p.log_delta) : 0.0;
  fb.variance = std::exp(p.log_var);
  fb.gamma = std::exp(p.log_gamma);
  detail::fill_filters(fb.fx, fb.mu_x, fb.mass_x, fb.gx, fb.delta, fb.variance, n, geometry.width);
  detail::fill_filters(fb.fy, fb.mu_y, fb.mass_y, fb.gy, fb.delta, fb.variance, n, geometry.height);
  return fb;
}

namespace detail {

inline void require_matching(const Frame& frame, const FilterBank& fb) {
  if (frame.width != fb.geometry.width || frame.height != fb.geometry.height)
    throw ValidationError("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                          " does not match filterbank geometry " + std::to_string(fb.geometry.width) +
                          "x" + std::to_string(fb.geometry.height));
}

// F_Y * frame * F_X^T without gamma.
inline Matrix filter_product(const Frame& frame, const FilterBank& fb) {
  const int n = fb.n;
  const int w = frame.width;
  const int h = frame.height;
  Matrix t(n, w);  // F_Y * frame
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < h; ++a) {
      const double f = fb.fy(i, a);
      if (f == 0.0) continue;
      for (int b = 0; b < w; ++b) t(i, b) += f * frame.at(b, a);
    }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int b = 0; b < w; ++b) s += t(i, b) * fb.fx(j, b);
      out(i, j) = s;
    }
  return out;
}

}  // namespace detail

// Attended N x N patch; row index follows y, column index follows x.
inline Matrix read(const Frame& frame, const FilterBank& fb) {
  detail::require_matching(frame, fb);
  Matrix out = detail::filter_product(frame, fb);
  for (double& v : out.data) v = fb.gamma * v;
  return out;
}

struct ReadGradient {
  AttentionParams params;
  Matrix frame;  // height x width
};

namespace detail {

struct AxisGradient {
  double centre = 0.0;
  double delta = 0.0;
  double variance = 0.0;
};

// Chain rule from dL/dF through row normalisation and the Gaussian into the
// grid centre, stride and variance of one axis.
inline AxisGradient filter_axis_gradient(const Matrix& f, const Matrix& df, const std::vector<double>& mu,
                                         const std::vector<double>& mass, double variance) {
  AxisGradient g;
  const int n = f.rows;
  for (int i = 0; i < n; ++i) {
    if (!(mass[static_cast<std::size_t>(i)] > 0.0)) continue;
    const double m = mu[static_cast<std::size_t>(i)];
    double s_df = 0.0, s_df_u = 0.0, s_df_u2 = 0.0, s_u = 0.0, s_u2 = 0.0;
    for (int a = 0; a < f.cols; ++a) {
      const double fv = f(i, a);
      const double u = a - m;
      const double w = df(i, a) * fv;
      s_df += w;
      s_df_u += w * u;
      s_df_u2 += w * u * u;
      s_u += fv * u;
      s_u2 += fv * u * u;
    }
    const double d_mu = (s_df_u - s_df * s_u) / variance;
    g.centre += d_mu;
    g.delta += d_mu * (i + 0.5 - n / 2.0);
    g.variance += (s_df_u2 - s_df * s_u2) / (2.0 * variance * variance);
  }
  return g;
}

}  // namespace detail

// Gradient of sum(upstream .* read(frame)) with respect to the five
// parameters and every frame pixel.
inline ReadGradient read_grad(const Frame& frame, const AttentionParams& p, const Matrix& upstream) {
  const int n = upstream.rows;
  if (upstream.cols != n) throw ValidationError("upstream gradient must be square");
  const FilterBank fb = build_filterbank(p, {frame.width, frame.height}, n);
  const int w = frame.width;
  const int h = frame.height;

  ReadGradient out;
  const Matrix unscaled = detail::filter_product(frame, fb);
  double d_gamma_log = 0.0;
  for (std::size_t k = 0; k < upstream.data.size(); ++k)
    d_gamma_log += upstream.data[k] * fb.gamma * unscaled.data[k];
  out.params.log_gamma = d_gamma_log;

  // G * F_X (n x w) and G^T * F_Y (n x h).
  Matrix g_fx(n, w), gt_fy(n, h);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double g = upstream(i, j);
      if (g == 0.0) continue;
      for (int b = 0; b < w; ++b) g_fx(i, b) += g * fb.fx(j, b);
      for (int a = 0; a < h; ++a) gt_fy(j, a) += g * fb.fy(i, a);
    }

  // dL/dframe = gamma * F_Y^T * G * F_X
  out.frame = Matrix(h, w);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < h; ++a) {
      const double f = fb.fy(i, a);
      if (f == 0.0) continue;
      for (int b = 0; b < w; ++b) out.frame(a, b) += fb.gamma * f * g_fx(i, b);
    }

  // dL/dF_Y = gamma * G * F_X * frame^T ; dL/dF_X = gamma * G^T * F_Y * frame
  Matrix d_fy(n, h), d_fx(n, w);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < h; ++a) {
      double s = 0.0;
      for (int b = 0; b < w; ++b) s += g_fx(i, b) * frame.at(b, a);
      d_fy(i, a) = fb.gamma * s;
    }
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < h; ++a) {
      const double g = gt_fy(j, a);
      if (g == 0.0) continue;
      for (int b = 0; b < w; ++b) d_fx(j, b) += fb.gamma * g * frame.at(b, a);
    }

  const auto ax = detail::filter_axis_gradient(fb.fx, d_fx, fb.mu_x, fb.mass_x, fb.variance);
  const auto ay = detail::filter_axis_gradient(fb.fy, d_fy, fb.mu_y, fb.mass_y, fb.variance);
  out.params.gx_tilde = ax.centre * (w + 1) / 2.0;
  out.params.gy_tilde = ay.centre * (h + 1) / 2.0;
  out.params.log_delta = (ax.delta + ay.delta) * fb.delta;
  out.params.log_var = (ax.variance + ay.variance) * fb.variance;
  return out;
}

// Projects an event into patch space: the brightest pixel of read() applied
// to a frame holding a single 1 at the event. That patch is the outer product
// of column e.y of F_Y and column e.x of F_X, so each axis is an independent
// argmax (lowest index on ties). Returns nullopt when the patch maximum is
// <= blank_eps.
inline std::optional<Event> event_read(const Event& e, const FilterBank& fb, double blank_eps = 1e-6) {
  validate_event(e, fb.geometry);
  int best_i = 0, best_j = 0;
  for (int i = 1; i < fb.n; ++i)
    if (fb.fy(i, e.y) > fb.fy(best_i, e.y)) best_i = i;
  for (int j = 1; j < fb.n; ++j)
    if (fb.fx(j, e.x) > fb.fx(best_j, e.x)) best_j = j;
  const double peak = fb.gamma * (fb.fy(best_i, e.y) * fb.fx(best_j, e.x));
  if (!(peak > blank_eps)) return std::nullopt;
  Event out = e;
  out.x = best_j;
  out.y = best_i;
  return out;
}

// --- Heuristic attention controller ------------------------------------------

struct ControllerSettings {
  double ema_decay = 0.02;   // weight of each new event; 1.0 keeps no memory
  double coverage = 4.0;     // grid span in units of the event spread
  double min_span = 0.0;     // lower bound on the grid span, pixels; 0 = (N - 1) / 2
  double sigma_ratio = 0.5;  // filter sigma as a fraction of the stride
};

// Stands in for a trained encoder: tracks an exponential moving average of
// raw event coordinates and their spread, centres the grid on the mean and
// scales stride and filter width with the spread. Starts (and resets) to a
// grid that spans the whole frame.
class CentroidController {
 public:
  CentroidController(StreamHeader geometry, int n, ControllerSettings settings = {})
      : geometry_(geometry), n_(n), settings_(settings) {
    validate_header(geometry);
    if (n < 1) throw ValidationError("patch size must be positive");
    if (!(settings.ema_decay > 0.0 && settings.ema_decay <= 1.0))
      throw ValidationError("ema_decay must lie in (0, 1]");
    if (!(settings.coverage > 0.0) || !(settings.sigma_ratio > 0.0) || settings.min_span < 0.0)
      throw ValidationError("controller coverage and sigma_ratio must be positive");
    reset();
  }

  void reset() {
    mean_x_ = (geometry_.width + 1) / 2.0;
    mean_y_ = (geometry_.height + 1) / 2.0;
    const double prior = full_span() / settings_.coverage;
    var_x_ = var_y_ = prior * prior;
    observed_ = 0;
  }

  std::size_t observed() const noexcept { return observed_; }
  double mean_x() const noexcept { return mean_x_; }
  double mean_y() const noexcept { return mean_y_; }

  void observe(const Event& e) {
    const double b = settings_.ema_decay;
    const double dx = e.x - mean_x_;
    const double dy = e.y - mean_y_;
    mean_x_ += b * dx;
    mean_y_ += b * dy;
    var_x_ = (1.0 - b) * (var_x_ + b * dx * dx);
    var_y_ = (1.0 - b) * (var_y_ + b * dy * dy);
    ++observed_;
  }

  AttentionParams update(std::span<const Event> events) {
    for (const Event& e : events) observe(e);
    return params();
  }

  AttentionParams params() const {
    const double spread = std::sqrt(std::max(var_x_, var_y_));
    const double min_span = settings_.min_span > 0.0 ? settings_.min_span : (n_ - 1) / 2.0;
    const double span = std::clamp(settings_.coverage * spread, std::min(min_span, full_span()), full_span());
    AttentionParams p;
    p.gx_tilde = 2.0 * mean_x_ / (geometry_.width + 1) - 1.0;
    p.gy_tilde = 2.0 * mean_y_ / (geometry_.height + 1) - 1.0;
    p.log_delta = std::log(span / full_span());
    const double sigma = settings_.sigma_ratio * span / std::max(n_ - 1, 1);
    p.log_var = 2.0 * std::log(sigma);
    p.log_gamma = 0.0;
    return p;
  }

  // Parameters of the start state.
  static AttentionParams full_frame(StreamHeader geometry, int n, ControllerSettings settings = {}) {
    return CentroidController(geometry, n, settings).params();
  }

 private:
  double full_span() const { return std::max(detail::grid_span(geometry_), 1.0); }

  StreamHeader geometry_;
  int n_;
  ControllerSettings settings_;
  double mean_x_ = 0.0;
  double mean_y_ = 0.0;
  double var_x_ = 0.0;
  double var_y_ = 0.0;
  std::size_t observed_ = 0;
};

}  // namespace evattn
