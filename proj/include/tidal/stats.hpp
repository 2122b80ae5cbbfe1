#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tidal {

// Regularized incomplete beta I_x(a, b), evaluated by Lentz's continued
// fraction (tolerance 1e-14, at most 200 iterations) with the symmetry
// I_x(a, b) = 1 - I_{1-x}(b, a) applied where the fraction converges slowly.
double incomplete_beta(double x, double a, double b);

// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df);

// P(F > f) for the F distribution with (d1, d2) degrees of freedom.
double f_sf(double f, double d1, double d2);

struct CorrelationCell {
  double r = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n_obs = 0;
};

// Two-sided p-value of a Pearson correlation with the given r^2 over n pairs.
double p_from_r2(double r_squared, std::size_t n);

// Throws InsufficientData for n < 3 or mismatched lengths, DegenerateInput
// when either sequence has zero variance.
CorrelationCell pearson(std::span<const double> x, std::span<const double> y);

// Overall F-test p-value of a k-predictor regression with intercept.
double p_from_f(double r_squared, std::size_t k, std::size_t n);

enum class RmseDenominator {
  N,              // sqrt(SSE / n), the default
  NMinusKMinus1,  // sqrt(SSE / (n - k - 1))
};

struct RegressionModel {
  std::string name;
  double intercept = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;
  double r_squared = 0.0;
  double p_value = 1.0;
  double rmse = 0.0;
  std::size_t n_obs = 0;

  std::vector<std::string> predictor_names() const;
};

// Row-major n_obs x k design, without the intercept column.
struct DesignMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

// Ordinary least squares with an intercept. Predictors are centered and
// scaled to unit norm, the resulting correlation-form normal equations are
// solved by Cholesky, and a condition number above 1e12 is reported as
// SingularDesign. Requires n_obs > k + 1.
RegressionModel ols_fit(const DesignMatrix& x, std::span<const double> y,
                        const std::vector<std::string>& names,
                        RmseDenominator rmse_denominator = RmseDenominator::N,
                        std::string model_name = {});

// Throws MissingFeature naming the first predictor absent from features.
double ols_predict(const RegressionModel& model,
                   const std::map<std::string, double>& features);

std::string to_json(const RegressionModel& model);
RegressionModel regression_model_from_json(const std::string& text);

}  // namespace tidal
