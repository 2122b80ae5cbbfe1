#include "tidal/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"
#include "tidal/error.hpp"

namespace tidal {

namespace {

constexpr double kBetaTolerance = 1e-14;
constexpr int kBetaMaxIterations = 200;
constexpr double kTiny = 1e-300;
constexpr double kMaxCondition = 1e12;

double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kBetaTolerance) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    fail(ErrorCode::InvalidParameter, "incomplete beta needs positive shape parameters");
  }
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) fail(ErrorCode::InvalidParameter, "degrees of freedom must be positive");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(x, 0.5 * df, 0.5);
  return t > 0.0 ? tail : 1.0 - tail;
}

double f_sf(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) {
    fail(ErrorCode::InvalidParameter, "degrees of freedom must be positive");
  }
  if (std::isnan(f)) return f;
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / (d2 + d1 * f), 0.5 * d2, 0.5 * d1);
}

double p_from_r2(double r_squared, std::size_t n) {
  if (n < 3) fail(ErrorCode::InsufficientData, "correlation p-value needs n >= 3");
  if (!(r_squared >= 0.0 && r_squared <= 1.0)) {
    fail(ErrorCode::InvalidParameter, "r_squared must lie in [0, 1]");
  }
  if (r_squared == 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::sqrt(r_squared * df / (1.0 - r_squared));
  return std::min(1.0, 2.0 * student_t_sf(t, df));
}

CorrelationCell pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::InsufficientData, "pearson needs sequences of equal length");
  }
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorCode::InsufficientData, "pearson needs at least 3 pairs");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(ErrorCode::DegenerateInput, "pearson input has zero variance");
  }
  CorrelationCell cell;
  cell.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  cell.r_squared = cell.r * cell.r;
  cell.p_value = p_from_r2(cell.r_squared, n);
  cell.n_obs = n;
  return cell;
}

double p_from_f(double r_squared, std::size_t k, std::size_t n) {
  if (k == 0) fail(ErrorCode::InvalidParameter, "F-test needs at least one predictor");
  if (n <= k + 1) fail(ErrorCode::InsufficientData, "F-test needs n > k + 1");
  if (!(r_squared >= 0.0 && r_squared <= 1.0)) {
    fail(ErrorCode::InvalidParameter, "r_squared must lie in [0, 1]");
  }
  if (r_squared == 1.0) return 0.0;
  const double d1 = static_cast<double>(k);
  const double d2 = static_cast<double>(n - k - 1);
  const double f = (r_squared / d1) / ((1.0 - r_squared) / d2);
  return f_sf(f, d1, d2);
}

std::vector<std::string> RegressionModel::predictor_names() const {
  std::vector<std::string> names;
  names.reserve(coefficients.size());
  for (const auto& [name, value] : coefficients) names.push_back(name);
  return names;
}

RegressionModel ols_fit(const DesignMatrix& x, std::span<const double> y,
                        const std::vector<std::string>& names,
                        RmseDenominator rmse_denominator, std::string model_name) {
  const std::size_t n = x.rows;
  const std::size_t k = x.cols;
  if (k == 0 || names.size() != k) {
    fail(ErrorCode::InvalidParameter, "need one name per predictor column");
  }
  if (std::set<std::string>(names.begin(), names.end()).size() != k) {
    fail(ErrorCode::InvalidParameter, "predictor names must be unique");
  }
  if (x.values.size() != n * k || y.size() != n) {
    fail(ErrorCode::InvalidParameter, "design matrix and response sizes disagree");
  }
  if (n <= k + 1) {
    fail(ErrorCode::InsufficientData, "regression needs more than k + 1 observations");
  }
  for (double v : x.values) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, "non-finite predictor value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, "non-finite response value");
  }

  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  MatrixXd z(n, k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) z(r, c) = x(r, c);
  const VectorXd means = z.colwise().mean();
  z.rowwise() -= means.transpose();
  VectorXd norms(k);
  for (std::size_t c = 0; c < k; ++c) {
    norms(c) = z.col(c).norm();
    if (norms(c) == 0.0) {
      fail(ErrorCode::SingularDesign, "predictor '" + names[c] + "' is constant");
    }
    z.col(c) /= norms(c);
  }

  VectorXd yv(n);
  for (std::size_t r = 0; r < n; ++r) yv(r) = y[r];
  const double y_mean = yv.mean();
  const VectorXd yc = yv.array() - y_mean;
  const double sst = yc.squaredNorm();
  if (sst == 0.0) fail(ErrorCode::DegenerateInput, "response has zero variance");

  const MatrixXd gram = z.transpose() * z;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    fail(ErrorCode::SingularDesign, "design matrix is rank deficient or ill-conditioned");
  }
  const Eigen::LLT<MatrixXd> chol(gram);
  if (chol.info() != Eigen::Success) {
    fail(ErrorCode::SingularDesign, "normal equations are not positive definite");
  }
  VectorXd beta = chol.solve(z.transpose() * yc);
  // One step of iterative refinement.
  beta += chol.solve(z.transpose() * (yc - z * beta));

  RegressionModel model;
  model.name = std::move(model_name);
  model.n_obs = n;
  double intercept = y_mean;
  for (std::size_t c = 0; c < k; ++c) {
    const double b = beta(c) / norms(c);
    model.coefficients.emplace_back(names[c], b);
    intercept -= b * means(c);
  }
  model.intercept = intercept;

  double sse = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fitted = intercept;
    for (std::size_t c = 0; c < k; ++c) fitted += model.coefficients[c].second * x(r, c);
    sse += (y[r] - fitted) * (y[r] - fitted);
  }
  model.r_squared = std::clamp(1.0 - sse / sst, 0.0, 1.0);
  const double denom = rmse_denominator == RmseDenominator::N
                           ? static_cast<double>(n)
                           : static_cast<double>(n - k - 1);
  model.rmse = std::sqrt(sse / denom);
  model.p_value = p_from_f(model.r_squared, k, n);
  return model;
}

double ols_predict(const RegressionModel& model,
                   const std::map<std::string, double>& features) {
  double out = model.intercept;
  for (const auto& [name, coef] : model.coefficients) {
    const auto it = features.find(name);
    if (it == features.end()) {
      fail(ErrorCode::MissingFeature, "missing feature '" + name + "'");
    }
    out += coef * it->second;
  }
  return out;
}

std::string to_json(const RegressionModel& model) {
  nlohmann::ordered_json j;
  j["name"] = model.name;
  j["intercept"] = model.intercept;
  j["coefficients"] = nlohmann::ordered_json::array();
  for (const auto& [name, value] : model.coefficients) {
    j["coefficients"].push_back({{"name", name}, {"value", value}});
  }
  j["r_squared"] = model.r_squared;
  j["p_value"] = model.p_value;
  j["rmse"] = model.rmse;
  j["n_obs"] = model.n_obs;
  return j.dump(2);
}

RegressionModel regression_model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RegressionModel m;
    m.name = j.at("name").get<std::string>();
    m.intercept = j.at("intercept").get<double>();
    for (const auto& c : j.at("coefficients")) {
      m.coefficients.emplace_back(c.at("name").get<std::string>(),
                                  c.at("value").get<double>());
    }
    m.r_squared = j.at("r_squared").get<double>();
    m.p_value = j.at("p_value").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.n_obs = j.at("n_obs").get<std::size_t>();
    if (m.coefficients.empty()) fail(ErrorCode::ParseError, "model has no coefficients");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad regression model JSON: ") + e.what());
  }
}

}  // namespace tidal
