#include "sdgm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sdgm/error.hpp"
#include "sdgm/format.hpp"
#include "sdgm/random.hpp"

namespace sdgm {

namespace {

using Eigen::Index;

constexpr std::uint64_t kSummaryStream = 0x5eed'5a3b'0000'0002ULL;
constexpr std::uint64_t kBoxStream = 0x5eed'b0c5'0000'0003ULL;

std::vector<double> simpson_weights(std::size_t nodes, double lo, double hi) {
  if (nodes < 3) nodes = 3;
  if (nodes % 2 == 0) ++nodes;
  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  std::vector<double> w(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double c = (i == 0 || i + 1 == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    w[i] = c * h / 3.0;
  }
  return w;
}

// Visits every grid node of a 1-D or 2-D Simpson rule.
template <class F>
void for_each_node(const Box& box, std::size_t nodes, F&& visit) {
  const std::size_t dims = box.ranges.size();
  if (dims == 0 || dims > 2) throw ConfigError("quadrature supports one or two dimensions only");
  std::vector<std::vector<double>> weights;
  for (const auto& [lo, hi] : box.ranges) {
    if (!(hi > lo)) throw ConfigError("quadrature box must have hi > lo");
    weights.push_back(simpson_weights(nodes, lo, hi));
  }
  auto coordinate = [&](std::size_t axis, std::size_t i) {
    const auto [lo, hi] = box.ranges[axis];
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(weights[axis].size() - 1);
  };
  Vector x(static_cast<Index>(dims));
  if (dims == 1) {
    for (std::size_t i = 0; i < weights[0].size(); ++i) {
      x[0] = coordinate(0, i);
      visit(x, weights[0][i]);
    }
    return;
  }
  for (std::size_t i = 0; i < weights[0].size(); ++i) {
    x[0] = coordinate(0, i);
    for (std::size_t j = 0; j < weights[1].size(); ++j) {
      x[1] = coordinate(1, j);
      visit(x, weights[0][i] * weights[1][j]);
    }
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// -----------------------------------------------------------------------------

double fd_relative_error(double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) return std::numeric_limits<double>::infinity();
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

FdReport fd_check_gradient(const std::function<double(const Vector&)>& f,
                           const std::function<Vector(const Vector&)>& grad_f, const Vector& point, double step,
                           double tol) {
  FdReport report;
  report.analytic = grad_f(point);
  report.numeric.resize(point.size());
  Vector x = point;
  for (Index k = 0; k < point.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(point[k]));
    x[k] = point[k] + h;
    const double up = f(x);
    x[k] = point[k] - h;
    const double down = f(x);
    x[k] = point[k];
    report.numeric[k] = (up - down) / (2.0 * h);
  }
  if (report.analytic.size() != point.size()) {
    report.worst_error = std::numeric_limits<double>::infinity();
    return report;
  }
  for (Index k = 0; k < point.size(); ++k) {
    const double err = fd_relative_error(report.analytic[k], report.numeric[k]);
    if (!(err <= report.worst_error)) {
      report.worst_error = err;
      report.worst_index = static_cast<std::size_t>(k);
    }
  }
  report.passed = report.worst_error <= tol;
  return report;
}

FdReport fd_check_jvp(const VariationalParams& params, const NoiseDraw& noise, const Vector& z, double step,
                      double tol) {
  auto contracted = [&](const Vector& flat) {
    const VariationalParams at = unflatten(params, std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
    return z.dot(sample(at, noise));
  };
  auto analytic = [&](const Vector&) { return flatten(jvp(params, noise, z)); };
  return fd_check_gradient(contracted, analytic, flatten(params), step, tol);
}

// -----------------------------------------------------------------------------

double quadrature_normalization(const std::function<double(const Vector&)>& log_density, const Box& box,
                                std::size_t nodes) {
  double total = 0.0;
  for_each_node(box, nodes, [&](const Vector& x, double w) { total += w * std::exp(log_density(x)); });
  return total;
}

QuadratureMoments quadrature_moments(const std::function<double(const Vector&)>& log_density, const Box& box,
                                     std::size_t nodes) {
  const auto dims = static_cast<Index>(box.ranges.size());
  QuadratureMoments out;
  out.mean = Vector::Zero(dims);
  Matrix second = Matrix::Zero(dims, dims);
  for_each_node(box, nodes, [&](const Vector& x, double w) {
    const double mass = w * std::exp(log_density(x));
    out.mass += mass;
    out.mean += mass * x;
    second += mass * x * x.transpose();
  });
  out.mean /= out.mass;
  out.covariance = second / out.mass - out.mean * out.mean.transpose();
  return out;
}

Box auto_box(const VariationalParams& params, std::size_t samples, std::uint64_t seed, double margin) {
  const std::size_t p = params.dim();
  std::vector<std::vector<double>> draws(p);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = Rng::substream(seed ^ kBoxStream, s);
    const Vector theta = sample(params, draw_noise(rng, p));
    for (std::size_t k = 0; k < p; ++k) draws[k].push_back(theta[static_cast<Index>(k)]);
  }
  Box box;
  for (auto& d : draws) {
    std::sort(d.begin(), d.end());
    const double q1 = d[d.size() / 4];
    const double q3 = d[(3 * d.size()) / 4];
    const double robust_sd = (q3 - q1) / 1.349;
    box.ranges.emplace_back(d.front() - margin * robust_sd, d.back() + margin * robust_sd);
  }
  return box;
}

// -----------------------------------------------------------------------------

MomentAccumulator::MomentAccumulator(std::size_t dim)
    : shift_(Vector::Zero(static_cast<Index>(dim))),
      s1_(Vector::Zero(static_cast<Index>(dim))),
      s2_(Vector::Zero(static_cast<Index>(dim))),
      s3_(Vector::Zero(static_cast<Index>(dim))) {}

void MomentAccumulator::add(const Vector& x, double weight) {
  if (!started_) {
    shift_ = x;  // shifting by the first draw limits cancellation in the raw sums
    started_ = true;
  }
  const Vector d = x - shift_;
  const Vector d2 = d.cwiseProduct(d);
  s1_ += weight * d;
  s2_ += weight * d2;
  s3_ += weight * d2.cwiseProduct(d);
  weight_sum_ += weight;
  ++count_;
}

Vector MomentAccumulator::mean() const { return shift_ + s1_ / weight_sum_; }

SummaryTable MomentAccumulator::table(const std::vector<std::string>& names) const {
  SummaryTable out;
  out.samples = count_;
  for (Index k = 0; k < s1_.size(); ++k) {
    const double m1 = s1_[k] / weight_sum_;
    const double r2 = s2_[k] / weight_sum_;
    const double r3 = s3_[k] / weight_sum_;
    const double m2 = std::max(0.0, r2 - m1 * m1);
    const double m3 = r3 - 3.0 * m1 * r2 + 2.0 * m1 * m1 * m1;
    SummaryRow row;
    row.name = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)]
                                                          : "theta" + std::to_string(k + 1);
    row.mean = shift_[k] + m1;
    row.sd = std::sqrt(m2);
    row.skewness = m2 > 0.0 ? m3 / (m2 * std::sqrt(m2)) : 0.0;
    out.rows.push_back(std::move(row));
  }
  return out;
}

SummaryTable summarize(const VariationalParams& params, std::size_t samples, std::uint64_t seed,
                       const std::vector<std::string>& names) {
  if (samples < 2) throw ConfigError("summarize: need at least two draws");
  const std::size_t p = params.dim();
  MomentAccumulator acc(p);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = Rng::substream(seed ^ kSummaryStream, s);
    acc.add(sample(params, draw_noise(rng, p)));
  }
  return acc.table(names);
}

ImportanceResult importance_summary(const VariationalParams& proposal, const TargetModel& model,
                                    std::size_t samples, std::uint64_t seed, const std::vector<std::string>& names) {
  if (samples < 2) throw ConfigError("importance_summary: need at least two draws");
  const std::size_t p = proposal.dim();
  auto draw = [&](std::size_t s) {
    Rng rng = Rng::substream(seed ^ kSummaryStream, s, 1);
    return sample(proposal, draw_noise(rng, p));
  };
  std::vector<double> log_w(samples);
  double max_log_w = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector theta = draw(s);
    log_w[s] = model.log_h(theta) - log_density(proposal, theta);
    if (!std::isfinite(log_w[s])) throw NumericalError("importance_summary: non-finite log weight");
    max_log_w = std::max(max_log_w, log_w[s]);
  }
  double w_sum = 0.0;
  double w_sq = 0.0;
  MomentAccumulator acc(p);
  for (std::size_t s = 0; s < samples; ++s) {
    const double w = std::exp(log_w[s] - max_log_w);
    w_sum += w;
    w_sq += w * w;
    acc.add(draw(s), w);
  }
  ImportanceResult out;
  out.table = acc.table(names.empty() ? model.coordinate_names() : names);
  out.effective_sample_size = w_sum * w_sum / w_sq;
  out.log_evidence = max_log_w + std::log(w_sum / static_cast<double>(samples));
  return out;
}

std::string to_csv(const SummaryTable& table) {
  std::string out = "name,mean,sd,skewness\n";
  for (const SummaryRow& row : table.rows) {
    out += csv_field(row.name) + "," + format_double(row.mean) + "," + format_double(row.sd) + "," +
           format_double(row.skewness) + "\n";
  }
  return out;
}

SummaryTable summary_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("name,mean,sd,skewness", 0) != 0) {
    throw ConfigError("summary csv: missing header 'name,mean,sd,skewness'");
  }
  SummaryTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // Names may be quoted; numbers never are, so split from the right.
    SummaryRow row;
    double* fields[3] = {&row.skewness, &row.sd, &row.mean};
    for (double* field : fields) {
      const auto comma = line.rfind(',');
      if (comma == std::string::npos || !parse_double(std::string_view(line).substr(comma + 1), *field)) {
        throw ConfigError("summary csv: malformed row '" + line + "'");
      }
      line.resize(comma);
    }
    if (line.size() >= 2 && line.front() == '"' && line.back() == '"') {
      std::string unq;
      for (std::size_t i = 1; i + 1 < line.size(); ++i) {
        unq += line[i];
        if (line[i] == '"') ++i;
      }
      line = unq;
    }
    row.name = line;
    table.rows.push_back(std::move(row));
  }
  return table;
}

// -----------------------------------------------------------------------------

ComparisonReport compare_fits(std::span<const FitRecord> fits) {
  if (fits.empty()) throw ConfigError("compare_fits: no fits given");
  for (const FitRecord& f : fits) {
    if (f.model_hash != fits.front().model_hash) {
      throw ConfigError("compare_fits: fits are over different models (" + fits.front().model_hash + " vs " +
                        f.model_hash + ")");
    }
    if (f.summary.rows.size() != fits.front().summary.rows.size()) {
      throw ConfigError("compare_fits: summary tables have different lengths");
    }
  }
  ComparisonReport report;
  for (const FitRecord& f : fits) report.elbo_rows.push_back({f.method, f.final_elbo});
  for (std::size_t a = 0; a < fits.size(); ++a) {
    for (std::size_t b = a + 1; b < fits.size(); ++b) {
      const auto& ra = fits[a].summary.rows;
      const auto& rb = fits[b].summary.rows;
      for (std::size_t k = 0; k < ra.size(); ++k) {
        report.delta_rows.push_back({fits[a].method, fits[b].method, ra[k].name, rb[k].mean - ra[k].mean,
                                     rb[k].sd - ra[k].sd, rb[k].skewness - ra[k].skewness});
      }
    }
  }
  return report;
}

std::string to_csv(const ComparisonReport& report) {
  std::string out = "row_type,method_a,method_b,coordinate,final_elbo,delta_mean,delta_sd,delta_skewness\n";
  for (const auto& row : report.elbo_rows) {
    out += "elbo," + csv_field(row.method) + ",,," + format_double(row.final_elbo) + ",,,\n";
  }
  for (const auto& row : report.delta_rows) {
    out += "delta," + csv_field(row.method_a) + "," + csv_field(row.method_b) + "," + csv_field(row.coordinate) +
           ",," + format_double(row.delta_mean) + "," + format_double(row.delta_sd) + "," +
           format_double(row.delta_skewness) + "\n";
  }
  return out;
}

}  // namespace sdgm
