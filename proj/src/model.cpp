#include "doseresp/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

namespace doseresp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

double inverse_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log_binomial_coefficient(int total, int k) {
  return std::lgamma(total + 1.0) - std::lgamma(k + 1.0) - std::lgamma(total - k + 1.0);
}

double binomial_logit_log_pmf(int n, int total, double eta) {
  // log p = -log1p_exp(-eta), log(1-p) = -log1p_exp(eta)
  double value = log_binomial_coefficient(total, n);
  if (n > 0) value -= n * log1p_exp(-eta);
  if (total - n > 0) value -= (total - n) * log1p_exp(eta);
  return value;
}

// ---------------------------------------------------------------------------

PriorSpec PriorSpec::parse(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c)))
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const auto open = s.find('(');
  const std::string name = s.substr(0, open);
  std::vector<double> args;
  if (open != std::string::npos) {
    if (s.back() != ')') throw PriorError("prior '" + std::string(text) + "': missing ')'");
    std::string_view body(s.data() + open + 1, s.size() - open - 2);
    while (!body.empty()) {
      const auto comma = body.find(',');
      std::string_view tok = body.substr(0, comma);
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
        throw PriorError("prior '" + std::string(text) + "': bad number '" +
                         std::string(tok) + "'");
      args.push_back(v);
      if (comma == std::string_view::npos) break;
      body.remove_prefix(comma + 1);
    }
  }

  auto need = [&](std::size_t count) {
    if (args.size() != count)
      throw PriorError("prior '" + std::string(text) + "': expected " + std::to_string(count) +
                       " parameters");
  };

  PriorSpec spec;
  if (name == "flat" || name == "none") {
    if (!args.empty()) need(0);
    spec = flat();
  } else if (name == "normal") {
    need(2);
    spec = normal(args[0], args[1]);
  } else if (name == "logistic") {
    need(2);
    spec = logistic(args[0], args[1]);
  } else if (name == "uniform") {
    need(2);
    if (std::isinf(args[0]) && std::isinf(args[1]) && args[0] < 0 && args[1] > 0)
      spec = flat();
    else
      spec = uniform(args[0], args[1]);
  } else if (name == "half_normal" || name == "halfnormal" || name == "half-normal") {
    if (args.size() == 2) {
      if (args[0] != 0.0) throw PriorError("half_normal location must be 0");
      spec = half_normal(args[1]);
    } else {
      need(1);
      spec = half_normal(args[0]);
    }
  } else if (name == "beta" || name == "weibull") {
    throw PriorError("prior family '" + name +
                     "' is not supported for sampling: its support does not cover a "
                     "regression coefficient");
  } else {
    throw PriorError("unknown prior family '" + name + "'");
  }
  spec.validate();
  return spec;
}

void PriorSpec::validate() const {
  switch (family) {
    case PriorFamily::normal:
    case PriorFamily::logistic:
    case PriorFamily::half_normal:
      if (!(p2 > 0.0) || !std::isfinite(p2) || !std::isfinite(p1))
        throw PriorError("scale must be positive and finite in " + to_string());
      break;
    case PriorFamily::uniform:
      if (!(p1 < p2) || !std::isfinite(p1) || !std::isfinite(p2))
        throw PriorError("uniform bounds must be finite with lower < upper in " + to_string());
      break;
    case PriorFamily::flat:
      break;
  }
}

std::string PriorSpec::to_string() const {
  switch (family) {
    case PriorFamily::normal:
      return "normal(" + format_number(p1) + "," + format_number(p2) + ")";
    case PriorFamily::logistic:
      return "logistic(" + format_number(p1) + "," + format_number(p2) + ")";
    case PriorFamily::uniform:
      return "uniform(" + format_number(p1) + "," + format_number(p2) + ")";
    case PriorFamily::half_normal:
      return "half_normal(0," + format_number(p2) + ")";
    case PriorFamily::flat:
      break;
  }
  return "flat";
}

LogPdf prior_log_pdf(const PriorSpec& spec, double x) {
  switch (spec.family) {
    case PriorFamily::normal: {
      const double z = (x - spec.p1) / spec.p2;
      return {-kHalfLog2Pi - std::log(spec.p2) - 0.5 * z * z, -z / spec.p2};
    }
    case PriorFamily::logistic: {
      const double z = (x - spec.p1) / spec.p2;
      const double az = std::abs(z);
      return {-az - std::log(spec.p2) - 2.0 * std::log1p(std::exp(-az)),
              -std::tanh(0.5 * z) / spec.p2};
    }
    case PriorFamily::uniform:
      if (x < spec.p1 || x > spec.p2) return {kNegInf, 0.0};
      return {-std::log(spec.p2 - spec.p1), 0.0};
    case PriorFamily::half_normal: {
      if (x < 0.0) return {kNegInf, 0.0};
      const double z = x / spec.p2;
      return {std::numbers::ln2 - kHalfLog2Pi - std::log(spec.p2) - 0.5 * z * z, -z / spec.p2};
    }
    case PriorFamily::flat:
      break;
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------

ScalarTransform ScalarTransform::for_prior(const PriorSpec& spec) {
  switch (spec.family) {
    case PriorFamily::half_normal:
      return {Kind::positive, 0.0, 0.0};
    case PriorFamily::uniform:
      return {Kind::interval, spec.p1, spec.p2};
    default:
      return {Kind::identity, 0.0, 0.0};
  }
}

double ScalarTransform::constrain(double u) const {
  switch (kind) {
    case Kind::positive:
      return std::exp(u);
    case Kind::interval:
      return lower + (upper - lower) * inverse_logit(u);
    case Kind::identity:
      break;
  }
  return u;
}

double ScalarTransform::unconstrain(double x) const {
  switch (kind) {
    case Kind::positive:
      return std::log(x);
    case Kind::interval: {
      const double s = (x - lower) / (upper - lower);
      return std::log(s) - std::log1p(-s);
    }
    case Kind::identity:
      break;
  }
  return x;
}

double ScalarTransform::jacobian(double u) const {
  switch (kind) {
    case Kind::positive:
      return std::exp(u);
    case Kind::interval: {
      const double s = inverse_logit(u);
      return (upper - lower) * s * (1.0 - s);
    }
    case Kind::identity:
      break;
  }
  return 1.0;
}

LogPdf ScalarTransform::log_jacobian(double u) const {
  switch (kind) {
    case Kind::positive:
      return {u, 1.0};
    case Kind::interval:
      return {std::log(upper - lower) - log1p_exp(-u) - log1p_exp(u),
              1.0 - 2.0 * inverse_logit(u)};
    case Kind::identity:
      break;
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------

double ModelDensity::log_density(std::span<const double> position) const {
  std::vector<double> g(dim());
  return log_density_gradient(position, g);
}

std::vector<double> ModelDensity::gradient(std::span<const double> position) const {
  std::vector<double> g(dim());
  log_density_gradient(position, g);
  return g;
}

LogPosterior log_posterior_with_gradient(const ModelDensity& model,
                                         std::span<const double> position) {
  if (position.size() != model.dim())
    throw std::invalid_argument("position has length " + std::to_string(position.size()) +
                                ", model dimension is " + std::to_string(model.dim()));
  for (double v : position)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite position component");
  LogPosterior out{0.0, std::vector<double>(model.dim())};
  out.value = model.log_density_gradient(position, out.gradient);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> cache_log_binom(const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records())
    out.push_back(log_binomial_coefficient(r.total, r.improved));
  return out;
}

// Binomial-logit log likelihood term without the binomial coefficient, and
// its derivative in eta.
inline LogPdf binomial_logit_kernel(int n, int total, double eta) {
  double value = 0.0;
  if (n > 0) value -= n * log1p_exp(-eta);
  if (total - n > 0) value -= (total - n) * log1p_exp(eta);
  return {value, n - total * inverse_logit(eta)};
}

}  // namespace

SimpleLrModel::SimpleLrModel(Dataset data, PriorSpec prior_alpha, PriorSpec prior_beta,
                             bool include_binomial_coefficient)
    : data_(std::move(data)),
      prior_alpha_(prior_alpha),
      prior_beta_(prior_beta),
      tf_alpha_(ScalarTransform::for_prior(prior_alpha)),
      tf_beta_(ScalarTransform::for_prior(prior_beta)) {
  prior_alpha_.validate();
  prior_beta_.validate();
  if (include_binomial_coefficient)
    log_binom_ = cache_log_binom(data_);
  else
    log_binom_.assign(data_.size(), 0.0);
}

double SimpleLrModel::log_likelihood(double alpha, double beta) const {
  double ll = 0.0;
  const auto& recs = data_.records();
  for (std::size_t i = 0; i < recs.size(); ++i)
    ll += log_binom_[i] +
          binomial_logit_kernel(recs[i].improved, recs[i].total, alpha + beta * recs[i].dosage)
              .value;
  return ll;
}

double SimpleLrModel::log_posterior_constrained(double alpha, double beta) const {
  const double lp = prior_log_pdf(prior_alpha_, alpha).value + prior_log_pdf(prior_beta_, beta).value;
  if (!std::isfinite(lp)) return kNegInf;
  return lp + log_likelihood(alpha, beta);
}

double SimpleLrModel::log_density_gradient(std::span<const double> q,
                                           std::span<double> grad) const {
  const double alpha = tf_alpha_.constrain(q[0]);
  const double beta = tf_beta_.constrain(q[1]);
  const auto pa = prior_log_pdf(prior_alpha_, alpha);
  const auto pb = prior_log_pdf(prior_beta_, beta);
  const auto ja = tf_alpha_.log_jacobian(q[0]);
  const auto jb = tf_beta_.log_jacobian(q[1]);

  double lp = pa.value + pb.value + ja.value + jb.value;
  double d_alpha = pa.derivative;
  double d_beta = pb.derivative;
  const auto& recs = data_.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const auto term = binomial_logit_kernel(r.improved, r.total, alpha + beta * r.dosage);
    lp += log_binom_[i] + term.value;
    d_alpha += term.derivative;
    d_beta += term.derivative * r.dosage;
  }
  grad[0] = d_alpha * tf_alpha_.jacobian(q[0]) + ja.derivative;
  grad[1] = d_beta * tf_beta_.jacobian(q[1]) + jb.derivative;
  return lp;
}

std::vector<double> SimpleLrModel::constrain(std::span<const double> q) const {
  return {tf_alpha_.constrain(q[0]), tf_beta_.constrain(q[1])};
}

std::vector<double> SimpleLrModel::unconstrain(double alpha, double beta) const {
  return {tf_alpha_.unconstrain(alpha), tf_beta_.unconstrain(beta)};
}

// ---------------------------------------------------------------------------

namespace {

ScalarTransform scale_transform(const PriorSpec& spec, const char* name) {
  if (spec.family == PriorFamily::half_normal) return ScalarTransform::for_prior(spec);
  if (spec.family == PriorFamily::uniform && spec.p1 >= 0.0)
    return ScalarTransform::for_prior(spec);
  throw PriorError(std::string(name) + " prior must have positive support (half_normal or "
                   "uniform with lower bound >= 0), got " + spec.to_string());
}

}  // namespace

HierLrModel::HierLrModel(Dataset data, Parameterization parameterization, HierPriors priors)
    : data_(std::move(data)),
      param_(parameterization),
      priors_(priors),
      tf_mu_a_(ScalarTransform::for_prior(priors.mu_alpha)),
      tf_mu_b_(ScalarTransform::for_prior(priors.mu_beta)),
      tf_sigma_a_(scale_transform(priors.sigma_alpha, "sigma_alpha")),
      tf_sigma_b_(scale_transform(priors.sigma_beta, "sigma_beta")),
      log_binom_(cache_log_binom(data_)) {
  priors_.mu_alpha.validate();
  priors_.mu_beta.validate();
  priors_.sigma_alpha.validate();
  priors_.sigma_beta.validate();
}

std::vector<std::string> HierLrModel::parameter_names() const {
  const std::size_t e = data_.size();
  std::vector<std::string> names;
  names.reserve(2 * e + 4);
  for (std::size_t i = 0; i < e; ++i) names.push_back("alpha." + std::to_string(i + 1));
  for (std::size_t i = 0; i < e; ++i) names.push_back("beta." + std::to_string(i + 1));
  names.insert(names.end(), {"mu_a", "mu_b", "sigma_a", "sigma_b"});
  return names;
}

double HierLrModel::log_density_gradient(std::span<const double> q,
                                         std::span<double> grad) const {
  const std::size_t e = data_.size();
  const double mu_a = tf_mu_a_.constrain(q[2 * e]);
  const double mu_b = tf_mu_b_.constrain(q[2 * e + 1]);
  const double sigma_a = tf_sigma_a_.constrain(q[2 * e + 2]);
  const double sigma_b = tf_sigma_b_.constrain(q[2 * e + 3]);

  const auto p_mu_a = prior_log_pdf(priors_.mu_alpha, mu_a);
  const auto p_mu_b = prior_log_pdf(priors_.mu_beta, mu_b);
  const auto p_sig_a = prior_log_pdf(priors_.sigma_alpha, sigma_a);
  const auto p_sig_b = prior_log_pdf(priors_.sigma_beta, sigma_b);
  const auto j_mu_a = tf_mu_a_.log_jacobian(q[2 * e]);
  const auto j_mu_b = tf_mu_b_.log_jacobian(q[2 * e + 1]);
  const auto j_sig_a = tf_sigma_a_.log_jacobian(q[2 * e + 2]);
  const auto j_sig_b = tf_sigma_b_.log_jacobian(q[2 * e + 3]);

  double lp = p_mu_a.value + p_mu_b.value + p_sig_a.value + p_sig_b.value + j_mu_a.value +
              j_mu_b.value + j_sig_a.value + j_sig_b.value;
  // Derivatives with respect to the constrained hyperparameters.
  double g_mu_a = p_mu_a.derivative, g_mu_b = p_mu_b.derivative;
  double g_sig_a = p_sig_a.derivative, g_sig_b = p_sig_b.derivative;

  const auto& recs = data_.records();
  if (param_ == Parameterization::centered) {
    const double log_sa = std::log(sigma_a), log_sb = std::log(sigma_b);
    for (std::size_t i = 0; i < e; ++i) {
      const double a = q[i], b = q[e + i];
      const double za = (a - mu_a) / sigma_a;
      const double zb = (b - mu_b) / sigma_b;
      const auto& r = recs[i];
      const auto like = binomial_logit_kernel(r.improved, r.total, a + b * r.dosage);
      lp += -2.0 * kHalfLog2Pi - log_sa - log_sb - 0.5 * (za * za + zb * zb) + log_binom_[i] +
            like.value;
      grad[i] = -za / sigma_a + like.derivative;
      grad[e + i] = -zb / sigma_b + like.derivative * r.dosage;
      g_mu_a += za / sigma_a;
      g_mu_b += zb / sigma_b;
      g_sig_a += (za * za - 1.0) / sigma_a;
      g_sig_b += (zb * zb - 1.0) / sigma_b;
    }
  } else {
    for (std::size_t i = 0; i < e; ++i) {
      const double ar = q[i], br = q[e + i];
      const double a = mu_a + sigma_a * ar;
      const double b = mu_b + sigma_b * br;
      const auto& r = recs[i];
      const auto like = binomial_logit_kernel(r.improved, r.total, a + b * r.dosage);
      lp += -2.0 * kHalfLog2Pi - 0.5 * (ar * ar + br * br) + log_binom_[i] + like.value;
      const double ra = like.derivative;
      const double rb = like.derivative * r.dosage;
      grad[i] = -ar + ra * sigma_a;
      grad[e + i] = -br + rb * sigma_b;
      g_mu_a += ra;
      g_mu_b += rb;
      g_sig_a += ra * ar;
      g_sig_b += rb * br;
    }
  }
  grad[2 * e] = g_mu_a * tf_mu_a_.jacobian(q[2 * e]) + j_mu_a.derivative;
  grad[2 * e + 1] = g_mu_b * tf_mu_b_.jacobian(q[2 * e + 1]) + j_mu_b.derivative;
  grad[2 * e + 2] = g_sig_a * tf_sigma_a_.jacobian(q[2 * e + 2]) + j_sig_a.derivative;
  grad[2 * e + 3] = g_sig_b * tf_sigma_b_.jacobian(q[2 * e + 3]) + j_sig_b.derivative;
  return lp;
}

std::vector<double> HierLrModel::constrain(std::span<const double> q) const {
  const std::size_t e = data_.size();
  const double mu_a = tf_mu_a_.constrain(q[2 * e]);
  const double mu_b = tf_mu_b_.constrain(q[2 * e + 1]);
  const double sigma_a = tf_sigma_a_.constrain(q[2 * e + 2]);
  const double sigma_b = tf_sigma_b_.constrain(q[2 * e + 3]);
  std::vector<double> out(2 * e + 4);
  for (std::size_t i = 0; i < e; ++i) {
    if (param_ == Parameterization::centered) {
      out[i] = q[i];
      out[e + i] = q[e + i];
    } else {
      out[i] = mu_a + sigma_a * q[i];
      out[e + i] = mu_b + sigma_b * q[e + i];
    }
  }
  out[2 * e] = mu_a;
  out[2 * e + 1] = mu_b;
  out[2 * e + 2] = sigma_a;
  out[2 * e + 3] = sigma_b;
  return out;
}

std::vector<double> HierLrModel::unconstrain(std::span<const double> alpha,
                                             std::span<const double> beta, double mu_alpha,
                                             double mu_beta, double sigma_alpha,
                                             double sigma_beta) const {
  const std::size_t e = data_.size();
  if (alpha.size() != e || beta.size() != e)
    throw std::invalid_argument("unconstrain: alpha/beta length must equal record count");
  std::vector<double> q(2 * e + 4);
  for (std::size_t i = 0; i < e; ++i) {
    if (param_ == Parameterization::centered) {
      q[i] = alpha[i];
      q[e + i] = beta[i];
    } else {
      q[i] = (alpha[i] - mu_alpha) / sigma_alpha;
      q[e + i] = (beta[i] - mu_beta) / sigma_beta;
    }
  }
  q[2 * e] = tf_mu_a_.unconstrain(mu_alpha);
  q[2 * e + 1] = tf_mu_b_.unconstrain(mu_beta);
  q[2 * e + 2] = tf_sigma_a_.unconstrain(sigma_alpha);
  q[2 * e + 3] = tf_sigma_b_.unconstrain(sigma_beta);
  return q;
}

// ---------------------------------------------------------------------------

ProportionModel::ProportionModel(int improved, int total, double prior_a, double prior_b)
    : n_(improved), total_(total), a_(prior_a), b_(prior_b) {
  if (improved < 0 || total < 0 || improved > total)
    throw std::invalid_argument("ProportionModel: need 0 <= improved <= total");
  if (!(prior_a > 0.0) || !(prior_b > 0.0))
    throw std::invalid_argument("ProportionModel: Beta prior shapes must be positive");
}

double ProportionModel::log_density_gradient(std::span<const double> q,
                                             std::span<double> grad) const {
  // Beta(a,b) prior times binomial likelihood, plus the logit Jacobian
  // p(1-p): exponents (n + a) and (N - n + b).
  const double s = n_ + a_;
  const double f = total_ - n_ + b_;
  const double p = inverse_logit(q[0]);
  grad[0] = s * (1.0 - p) - f * p;
  return -s * log1p_exp(-q[0]) - f * log1p_exp(q[0]);
}

std::vector<double> ProportionModel::constrain(std::span<const double> q) const {
  return {inverse_logit(q[0])};
}

double ProportionModel::log_posterior_constrained(double p) const {
  const double a = a_ + n_;
  const double b = b_ + total_ - n_;
  if (p <= 0.0 || p >= 1.0) {
    if ((p == 0.0 && a == 1.0) || (p == 1.0 && b == 1.0))
      return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    return kNegInf;
  }
  return (a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

// ---------------------------------------------------------------------------

StandardNormalModel::StandardNormalModel(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("StandardNormalModel: dim must be >= 1");
}

double StandardNormalModel::log_density_gradient(std::span<const double> q,
                                                 std::span<double> grad) const {
  double lp = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    lp -= 0.5 * q[i] * q[i];
    grad[i] = -q[i];
  }
  return lp;
}

std::vector<double> StandardNormalModel::constrain(std::span<const double> q) const {
  return {q.begin(), q.end()};
}

std::vector<std::string> StandardNormalModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim_; ++i) names.push_back("x." + std::to_string(i + 1));
  return names;
}

}  // namespace doseresp
