// Copyright 2026 The safechat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Hypothesis tests, design matrices and regression with organization-level
// clustered standard errors.

#ifndef SAFECHAT_STATS_H_
#define SAFECHAT_STATS_H_

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "safechat/timestamp.h"

namespace safechat::stats {

// ---------------------------------------------------------------------------
// Distributions

enum class Distribution { kChiSquare, kStudentT, kF };

// Regularized incomplete gamma P(a, x), Q(a, x) and incomplete beta I_x(a, b).
// Series expansion on one side of the transition point, Lentz continued
// fraction on the other.
double gamma_p(double a, double x);
double gamma_q(double a, double x);
double beta_i(double x, double a, double b);

// Upper tail for chi-square and F, two-tailed for t. `df2` is used only by F.
// Throws ValidationError on non-finite input or non-positive df.
double tail_probability(Distribution dist, double statistic, double df1,
                        double df2 = 0.0);

// ---------------------------------------------------------------------------
// Tests

enum class TestKind { kChiSquareGof, kWelchT, kPooledT, kPairedT, kAnovaF, kLeveneW };
std::string_view test_kind_name(TestKind kind);

struct TestResult {
  TestKind kind = TestKind::kChiSquareGof;
  double statistic = 0.0;
  double df1 = 0.0;
  std::optional<double> df2;
  double p_value = 1.0;
};

// sum (O - E)^2 / E with df = k - 1 unless `df` is supplied.
TestResult chi_square_gof(std::span<const double> observed,
                          std::span<const double> expected,
                          std::optional<double> df = std::nullopt);

// Expected counts from the margins of an r x c table, df = (r-1)(c-1).
TestResult chi_square_independence(const std::vector<std::vector<double>>& table);

struct TTestOptions {
  bool paired = false;
  bool pooled = false;  // unpaired only; Welch otherwise
};

// Throws ValidationError "degenerate variance" when the standard error is 0.
TestResult t_test(std::span<const double> a, std::span<const double> b,
                  TTestOptions options = {});

TestResult one_way_anova(std::span<const std::vector<double>> groups);

// Classic Levene W: one-way ANOVA on |x - group mean|. When the deviations
// have no within-group spread the statistic is 0 (no between-group spread) or
// +inf with p = 0.
TestResult levene_test(std::span<const std::vector<double>> groups);

// ---------------------------------------------------------------------------
// Design matrices

using Value = std::variant<double, std::string>;
using Record = std::map<std::string, Value, std::less<>>;

struct Covariate {
  enum class Encoding { kContinuous, kCategorical };
  std::string field;
  Encoding encoding = Encoding::kContinuous;
  std::string reference;  // categorical only

  static Covariate continuous(std::string field) {
    return {std::move(field), Encoding::kContinuous, {}};
  }
  static Covariate categorical(std::string field, std::string reference) {
    return {std::move(field), Encoding::kCategorical, std::move(reference)};
  }
};

struct DesignSpec {
  std::string outcome;
  std::vector<Covariate> covariates;
  std::optional<std::string> cluster_field;
};

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> clusters;  // empty without a cluster field
  std::vector<std::string> terms;     // column names; "(Intercept)" first
};

inline constexpr std::string_view kIntercept = "(Intercept)";

// Intercept column first, then each covariate in order. Categorical levels
// other than the reference become 0/1 columns named "field[level]" in sorted
// level order.
Design design_matrix(std::span<const Record> records, const DesignSpec& spec);

// Six 4-hour windows of the stored local clock, starting at midnight.
const std::array<std::string_view, 6>& time_of_day_buckets();
std::string_view time_of_day_bucket(const Timestamp& ts);

// ---------------------------------------------------------------------------
// Regression

enum class ModelKind { kOls, kLogistic };

struct RegressionResult {
  ModelKind kind = ModelKind::kOls;
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd p_values;
  std::size_t n = 0;
  bool converged = true;
  std::size_t iterations = 0;
  bool separation = false;
  std::string diagnostics;
  // Log-likelihood after each accepted logistic iteration.
  std::vector<double> log_likelihood;
  // (X'X)^-1 for OLS and (X'WX)^-1 for logistic at the estimate.
  Eigen::MatrixXd bread;
  Eigen::VectorXd residuals;  // y - fitted (response scale)
  std::string se_type = "classical";
  std::size_t n_clusters = 0;

  std::size_t index_of(std::string_view term) const;  // throws if absent
  double coefficient(std::string_view term) const;
  double standard_error(std::string_view term) const;
  double p_value(std::string_view term) const;
};

// Householder QR least squares with classical standard errors and t(n-k)
// p-values. Throws ValidationError naming the first linearly dependent
// column.
RegressionResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::vector<std::string> terms = {});

struct LogisticOptions {
  std::size_t max_iter = 100;
  double tol = 1e-10;
  // |beta| beyond this marks quasi/complete separation.
  double separation_guard = 30.0;
};

// IRLS (Newton) with step halving so the log-likelihood never decreases.
// Separation yields converged = false and separation = true rather than an
// error. Throws ValidationError for a constant or non-binary outcome.
RegressionResult logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              std::vector<std::string> terms = {},
                              const LogisticOptions& options = {});

// Sandwich covariance with score vectors summed within clusters and the CR1
// factor G/(G-1) * (N-1)/(N-K). Needs at least two clusters.
Eigen::VectorXd clustered_se(const RegressionResult& fit, const Eigen::MatrixXd& x,
                             std::span<const std::string> clusters);

// HC1 robust standard errors, N/(N-K) scaling.
Eigen::VectorXd robust_se(const RegressionResult& fit, const Eigen::MatrixXd& x);

// Copy of `fit` with clustered standard errors and t(G-1) p-values.
RegressionResult with_clustered_se(const RegressionResult& fit,
                                   const Eigen::MatrixXd& x,
                                   std::span<const std::string> clusters);

// "." < 0.05, "*" < 0.01, "**" < 0.005, "***" < 0.001, "" otherwise.
std::string significance_stars(double p);

// CSV with header term,coeff,se,stars.
std::string regression_csv(const RegressionResult& fit);

}  // namespace safechat::stats

#endif  // SAFECHAT_STATS_H_
