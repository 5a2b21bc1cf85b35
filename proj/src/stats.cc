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

#include "safechat/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "safechat/error.h"
#include "safechat/text.h"

namespace safechat::stats {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " is not finite");
}

// Series for P(a, x), valid for x < a + 1.
double gamma_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const int m2 = 2 * m;
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
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance.
double variance(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

struct SumsOfSquares {
  double between = 0.0;
  double within = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
};

SumsOfSquares sums_of_squares(std::span<const std::vector<double>> groups,
                              const char* name) {
  if (groups.size() < 2) throw ValidationError(std::string(name) + " needs at least 2 groups");
  SumsOfSquares s;
  s.k = groups.size();
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) {
      throw ValidationError(std::string(name) + " needs at least 2 observations per group");
    }
    for (double x : g) {
      require_finite(x, "observation");
      total += x;
    }
    s.n += g.size();
  }
  const double grand = total / static_cast<double>(s.n);
  for (const auto& g : groups) {
    const double m = mean(g);
    s.between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) s.within += (x - m) * (x - m);
  }
  return s;
}

TestResult f_result(TestKind kind, const SumsOfSquares& s, double f) {
  TestResult r;
  r.kind = kind;
  r.statistic = f;
  r.df1 = static_cast<double>(s.k - 1);
  r.df2 = static_cast<double>(s.n - s.k);
  r.p_value = std::isinf(f) ? 0.0 : tail_probability(Distribution::kF, f, r.df1, *r.df2);
  return r;
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  return ldlt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

std::vector<std::string> default_terms(std::string_view prefix, Eigen::Index k) {
  std::vector<std::string> t;
  for (Eigen::Index j = 0; j < k; ++j) t.push_back(std::string(prefix) + std::to_string(j));
  return t;
}

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  std::vector<std::string>& terms) {
  if (x.rows() != y.size()) throw ValidationError("X and y have different row counts");
  if (x.cols() == 0) throw ValidationError("design has no columns");
  if (x.rows() < x.cols()) throw ValidationError("fewer rows than columns");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("design contains non-finite values");
  if (terms.empty()) terms = default_terms("x", x.cols());
  if (static_cast<Eigen::Index>(terms.size()) != x.cols()) {
    throw ValidationError("term names do not match column count");
  }
}

// Names the first column that lies in the span of the columns before it.
void check_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& terms) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(x);
  if (full.rank() == x.cols()) return;
  for (Eigen::Index j = 1; j <= x.cols(); ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.leftCols(j));
    qr.setThreshold(full.threshold());
    if (qr.rank() < j) {
      throw ValidationError("design is rank deficient: column " + terms[j - 1] +
                            " is linearly dependent on earlier columns");
    }
  }
  throw ValidationError("design is rank deficient");
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) without overflow.
    const double softplus = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
    ll += y[i] * e - softplus;
  }
  return ll;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& eta) {
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    p[i] = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
  }
  return p;
}

Eigen::VectorXd sandwich_se(const RegressionResult& fit, const Eigen::MatrixXd& x,
                            std::span<const std::string> clusters, double factor) {
  const Eigen::Index k = x.cols();
  std::map<std::string, Eigen::VectorXd, std::less<>> sums;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd score = x.row(i).transpose() * fit.residuals[i];
    auto [it, inserted] = sums.try_emplace(clusters[static_cast<std::size_t>(i)], score);
    if (!inserted) it->second += score;
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, u] : sums) meat += u * u.transpose();
  const Eigen::MatrixXd v = factor * fit.bread * meat * fit.bread;
  return v.diagonal().cwiseMax(0.0).cwiseSqrt();
}

void check_fit_design(const RegressionResult& fit, const Eigen::MatrixXd& x) {
  if (x.rows() != fit.residuals.size() || x.cols() != fit.coefficients.size()) {
    throw ValidationError("design does not match the fitted model");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Distributions

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ValidationError("gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_cf(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ValidationError("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_series(a, x) : gamma_cf(a, x);
}

double beta_i(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || x < 0.0 || x > 1.0) {
    throw ValidationError("beta_i: invalid arguments");
  }
  if (x == 0.0 || x == 1.0) return x;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double tail_probability(Distribution dist, double statistic, double df1, double df2) {
  require_finite(statistic, "statistic");
  require_finite(df1, "df");
  if (!(df1 > 0.0)) throw ValidationError("df must be positive");
  switch (dist) {
    case Distribution::kChiSquare:
      if (statistic <= 0.0) return 1.0;
      return clamp_p(gamma_q(df1 / 2.0, statistic / 2.0));
    case Distribution::kStudentT: {
      const double t2 = statistic * statistic;
      if (t2 == 0.0) return 1.0;
      return clamp_p(beta_i(df1 / (df1 + t2), df1 / 2.0, 0.5));
    }
    case Distribution::kF:
      require_finite(df2, "df2");
      if (!(df2 > 0.0)) throw ValidationError("df must be positive");
      if (statistic <= 0.0) return 1.0;
      return clamp_p(beta_i(df2 / (df2 + df1 * statistic), df2 / 2.0, df1 / 2.0));
  }
  throw ValidationError("unknown distribution");
}

// ---------------------------------------------------------------------------
// Tests

std::string_view test_kind_name(TestKind kind) {
  switch (kind) {
    case TestKind::kChiSquareGof: return "chi_square_gof";
    case TestKind::kWelchT: return "welch_t";
    case TestKind::kPooledT: return "pooled_t";
    case TestKind::kPairedT: return "paired_t";
    case TestKind::kAnovaF: return "anova_f";
    case TestKind::kLeveneW: return "levene_w";
  }
  return "unknown";
}

TestResult chi_square_gof(std::span<const double> observed,
                          std::span<const double> expected, std::optional<double> df) {
  if (observed.size() != expected.size()) {
    throw ValidationError("observed and expected have different lengths");
  }
  if (observed.size() < 2) throw ValidationError("chi-square needs at least 2 cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    require_finite(observed[i], "observed count");
    require_finite(expected[i], "expected count");
    if (!(expected[i] > 0.0)) throw ValidationError("expected counts must be positive");
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  TestResult r;
  r.kind = TestKind::kChiSquareGof;
  r.statistic = stat;
  r.df1 = df.value_or(static_cast<double>(observed.size() - 1));
  r.p_value = tail_probability(Distribution::kChiSquare, stat, r.df1);
  return r;
}

TestResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  const std::size_t rows = table.size();
  if (rows < 2) throw ValidationError("contingency table needs at least 2 rows");
  const std::size_t cols = table.front().size();
  if (cols < 2) throw ValidationError("contingency table needs at least 2 columns");
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw ValidationError("ragged contingency table");
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += table[i][j];
      col_sum[j] += table[i][j];
      total += table[i][j];
    }
  }
  std::vector<double> o, e;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      o.push_back(table[i][j]);
      e.push_back(row_sum[i] * col_sum[j] / total);
    }
  }
  return chi_square_gof(o, e, static_cast<double>((rows - 1) * (cols - 1)));
}

TestResult t_test(std::span<const double> a, std::span<const double> b,
                  TTestOptions options) {
  for (double v : a) require_finite(v, "observation");
  for (double v : b) require_finite(v, "observation");
  TestResult r;
  if (options.paired) {
    if (a.size() != b.size()) throw ValidationError("paired samples differ in length");
    if (a.size() < 2) throw ValidationError("paired t-test needs at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double var = variance(d);
    if (!(var > 0.0)) throw ValidationError("degenerate variance");
    const double n = static_cast<double>(d.size());
    r.kind = TestKind::kPairedT;
    r.statistic = mean(d) / std::sqrt(var / n);
    r.df1 = n - 1.0;
  } else {
    if (a.size() < 2 || b.size() < 2) {
      throw ValidationError("t-test needs at least 2 observations per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = variance(a);
    const double vb = variance(b);
    const double diff = mean(a) - mean(b);
    if (options.pooled) {
      const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
      if (!(sp2 > 0.0)) throw ValidationError("degenerate variance");
      r.kind = TestKind::kPooledT;
      r.statistic = diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
      r.df1 = na + nb - 2.0;
    } else {
      const double qa = va / na;
      const double qb = vb / nb;
      if (!(qa + qb > 0.0)) throw ValidationError("degenerate variance");
      r.kind = TestKind::kWelchT;
      r.statistic = diff / std::sqrt(qa + qb);
      r.df1 = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    }
  }
  r.p_value = tail_probability(Distribution::kStudentT, r.statistic, r.df1);
  return r;
}

TestResult one_way_anova(std::span<const std::vector<double>> groups) {
  const SumsOfSquares s = sums_of_squares(groups, "ANOVA");
  if (!(s.within > 0.0)) throw ValidationError("zero within-group variance");
  const double f = (s.between / static_cast<double>(s.k - 1)) /
                   (s.within / static_cast<double>(s.n - s.k));
  return f_result(TestKind::kAnovaF, s, f);
}

TestResult levene_test(std::span<const std::vector<double>> groups) {
  std::vector<std::vector<double>> dev;
  dev.reserve(groups.size());
  bool any = false;
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("Levene test needs at least 2 observations per group");
    const double m = mean(g);
    auto& z = dev.emplace_back();
    for (double x : g) {
      z.push_back(std::abs(x - m));
      if (z.back() != 0.0) any = true;
    }
  }
  const SumsOfSquares s = sums_of_squares(dev, "Levene test");
  if (!any) throw ValidationError("all deviations are zero");
  double w = 0.0;
  if (s.within > 0.0) {
    w = (s.between / static_cast<double>(s.k - 1)) / (s.within / static_cast<double>(s.n - s.k));
  } else if (s.between > 0.0) {
    w = std::numeric_limits<double>::infinity();
  }
  return f_result(TestKind::kLeveneW, s, w);
}

// ---------------------------------------------------------------------------
// Design matrices

Design design_matrix(std::span<const Record> records, const DesignSpec& spec) {
  if (records.empty()) throw ValidationError("no records");
  std::set<std::string, std::less<>> seen;
  for (const auto& c : spec.covariates) {
    if (!seen.insert(c.field).second) throw ValidationError("duplicate covariate " + c.field);
  }

  auto field = [&](std::size_t row, const std::string& name) -> const Value& {
    const auto it = records[row].find(name);
    if (it == records[row].end()) {
      throw ValidationError("record " + std::to_string(row + 1) + ": missing field " + name);
    }
    return it->second;
  };
  auto number = [&](std::size_t row, const std::string& name) {
    const Value& v = field(row, name);
    if (const double* d = std::get_if<double>(&v)) return *d;
    throw ValidationError("record " + std::to_string(row + 1) + ": field " + name +
                          " is not numeric");
  };
  auto level = [&](std::size_t row, const std::string& name) {
    const Value& v = field(row, name);
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    std::ostringstream os;
    os << std::get<double>(v);
    return os.str();
  };

  const std::size_t n = records.size();
  Design d;
  d.terms.emplace_back(kIntercept);
  std::vector<std::vector<double>> columns{std::vector<double>(n, 1.0)};
  for (const auto& c : spec.covariates) {
    if (c.encoding == Covariate::Encoding::kContinuous) {
      auto& col = columns.emplace_back(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = number(i, c.field);
      d.terms.push_back(c.field);
      continue;
    }
    std::vector<std::string> values(n);
    std::set<std::string> levels;
    for (std::size_t i = 0; i < n; ++i) levels.insert(values[i] = level(i, c.field));
    if (!levels.contains(c.reference)) {
      throw ValidationError("reference level \"" + c.reference + "\" not observed for " +
                            c.field);
    }
    for (const auto& lv : levels) {
      if (lv == c.reference) continue;
      auto& col = columns.emplace_back(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) col[i] = values[i] == lv ? 1.0 : 0.0;
      d.terms.push_back(c.field + "[" + lv + "]");
    }
  }

  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& col = columns[j];
    if (j > 0 && std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; })) {
      throw ValidationError("term " + d.terms[j] + " is constant and collides with the intercept");
    }
    for (std::size_t i = 0; i < n; ++i) {
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
  }
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) d.y[static_cast<Eigen::Index>(i)] = number(i, spec.outcome);
  if (spec.cluster_field) {
    for (std::size_t i = 0; i < n; ++i) d.clusters.push_back(level(i, *spec.cluster_field));
  }
  return d;
}

const std::array<std::string_view, 6>& time_of_day_buckets() {
  static constexpr std::array<std::string_view, 6> kBuckets = {
      "12 a.m. - 4 a.m.", "4 a.m. - 8 a.m.", "8 a.m. - 12 p.m.",
      "12 p.m. - 4 p.m.", "4 p.m. - 8 p.m.", "8 p.m. - 12 a.m.",
  };
  return kBuckets;
}

std::string_view time_of_day_bucket(const Timestamp& ts) {
  return time_of_day_buckets()[static_cast<std::size_t>(ts.local_hour() / 4)];
}

// ---------------------------------------------------------------------------
// Regression

std::size_t RegressionResult::index_of(std::string_view term) const {
  const auto it = std::find(terms.begin(), terms.end(), term);
  if (it == terms.end()) throw NotFoundError("no term " + std::string(term));
  return static_cast<std::size_t>(it - terms.begin());
}

double RegressionResult::coefficient(std::string_view term) const {
  return coefficients[static_cast<Eigen::Index>(index_of(term))];
}

double RegressionResult::standard_error(std::string_view term) const {
  return standard_errors[static_cast<Eigen::Index>(index_of(term))];
}

double RegressionResult::p_value(std::string_view term) const {
  return p_values[static_cast<Eigen::Index>(index_of(term))];
}

RegressionResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::vector<std::string> terms) {
  check_shapes(x, y, terms);
  check_rank(x, terms);
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));

  RegressionResult fit;
  fit.kind = ModelKind::kOls;
  fit.terms = std::move(terms);
  fit.n = static_cast<std::size_t>(n);
  fit.iterations = 1;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - x * fit.coefficients;
  fit.bread = r_inv * r_inv.transpose();

  const double dof = static_cast<double>(n - k);
  const double rss = fit.residuals.squaredNorm();
  fit.p_values = Eigen::VectorXd::Ones(k);
  if (dof > 0) {
    const double sigma2 = rss / dof;
    fit.standard_errors = (sigma2 * fit.bread.diagonal()).cwiseSqrt();
    for (Eigen::Index j = 0; j < k; ++j) {
      const double se = fit.standard_errors[j];
      fit.p_values[j] = se > 0 ? tail_probability(Distribution::kStudentT,
                                                  fit.coefficients[j] / se, dof)
                               : (fit.coefficients[j] == 0 ? 1.0 : 0.0);
    }
  } else {
    fit.standard_errors = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    fit.diagnostics = "no residual degrees of freedom";
  }
  return fit;
}

RegressionResult logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              std::vector<std::string> terms,
                              const LogisticOptions& options) {
  check_shapes(x, y, terms);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("outcome must be 0 or 1");
  }
  if (y.minCoeff() == y.maxCoeff()) throw ValidationError("degenerate outcome");
  check_rank(x, terms);

  const Eigen::Index k = x.cols();
  RegressionResult fit;
  fit.kind = ModelKind::kLogistic;
  fit.terms = std::move(terms);
  fit.n = static_cast<std::size_t>(x.rows());
  fit.converged = false;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = log_likelihood(x * beta, y);
  fit.log_likelihood.push_back(ll);
  Eigen::MatrixXd hessian;
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd p = sigmoid(x * beta);
    const Eigen::VectorXd w = p.cwiseProduct(Eigen::VectorXd::Ones(p.size()) - p);
    const Eigen::VectorXd grad = x.transpose() * (y - p);
    hessian = x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd delta = hessian.ldlt().solve(grad);
    if (!delta.allFinite()) {
      fit.diagnostics = "singular information matrix";
      break;
    }
    // Step halving keeps the log-likelihood non-decreasing.
    double step = 1.0;
    Eigen::VectorXd next = beta + delta;
    double ll_next = log_likelihood(x * next, y);
    for (int h = 0; h < 50 && ll_next < ll; ++h) {
      step /= 2.0;
      next = beta + step * delta;
      ll_next = log_likelihood(x * next, y);
    }
    if (ll_next < ll) {
      fit.diagnostics = "step halving failed to improve the log-likelihood";
      break;
    }
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    ll = ll_next;
    fit.log_likelihood.push_back(ll);
    if (beta.lpNorm<Eigen::Infinity>() > options.separation_guard) {
      fit.separation = true;
      fit.diagnostics = "separation:";
      for (Eigen::Index j = 0; j < k; ++j)
        if (std::abs(beta[j]) > options.separation_guard) fit.diagnostics += " " + fit.terms[j];
      break;
    }
    if (change <= options.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged && fit.diagnostics.empty()) {
    fit.diagnostics = "no convergence after " + std::to_string(options.max_iter) + " iterations";
  }

  const Eigen::VectorXd p = sigmoid(x * beta);
  const Eigen::VectorXd w = p.cwiseProduct(Eigen::VectorXd::Ones(p.size()) - p);
  fit.coefficients = beta;
  fit.residuals = y - p;
  fit.bread = inverse_spd(x.transpose() * w.asDiagonal() * x);
  fit.standard_errors = fit.bread.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.p_values.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double se = fit.standard_errors[j];
    fit.p_values[j] =
        se > 0 && std::isfinite(se) ? std::erfc(std::abs(beta[j] / se) / std::sqrt(2.0)) : 1.0;
  }
  return fit;
}

Eigen::VectorXd clustered_se(const RegressionResult& fit, const Eigen::MatrixXd& x,
                             std::span<const std::string> clusters) {
  check_fit_design(fit, x);
  if (static_cast<Eigen::Index>(clusters.size()) != x.rows()) {
    throw ValidationError("cluster vector does not match row count");
  }
  const std::set<std::string_view> distinct(clusters.begin(), clusters.end());
  const double g = static_cast<double>(distinct.size());
  if (g < 2) throw ValidationError("clustered standard errors need at least 2 clusters");
  const double n = static_cast<double>(x.rows());
  const double k = static_cast<double>(x.cols());
  if (!(n > k)) throw ValidationError("no residual degrees of freedom");
  return sandwich_se(fit, x, clusters, g / (g - 1.0) * (n - 1.0) / (n - k));
}

Eigen::VectorXd robust_se(const RegressionResult& fit, const Eigen::MatrixXd& x) {
  check_fit_design(fit, x);
  const double n = static_cast<double>(x.rows());
  const double k = static_cast<double>(x.cols());
  if (!(n > k)) throw ValidationError("no residual degrees of freedom");
  std::vector<std::string> rows(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = std::to_string(i);
  return sandwich_se(fit, x, rows, n / (n - k));
}

RegressionResult with_clustered_se(const RegressionResult& fit, const Eigen::MatrixXd& x,
                                   std::span<const std::string> clusters) {
  RegressionResult out = fit;
  out.standard_errors = clustered_se(fit, x, clusters);
  out.se_type = "cluster";
  out.n_clusters = std::set<std::string_view>(clusters.begin(), clusters.end()).size();
  const double dof = static_cast<double>(out.n_clusters - 1);
  for (Eigen::Index j = 0; j < out.coefficients.size(); ++j) {
    const double se = out.standard_errors[j];
    out.p_values[j] = se > 0 ? tail_probability(Distribution::kStudentT,
                                                out.coefficients[j] / se, dof)
                             : 1.0;
  }
  return out;
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.005) return "**";
  if (p < 0.01) return "*";
  if (p < 0.05) return ".";
  return "";
}

std::string regression_csv(const RegressionResult& fit) {
  std::ostringstream os;
  os << "term,coeff,se,stars\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    const auto idx = static_cast<Eigen::Index>(j);
    os << text::csv_field(fit.terms[j]) << ',' << fit.coefficients[idx] << ',' << fit.standard_errors[idx] << ','
       << significance_stars(fit.p_values[idx]) << '\n';
  }
  return os.str();
}

}  // namespace safechat::stats
