#include "irp/flow.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "irp/dataset.hpp"
#include "irp/rng.hpp"
#include "text_util.hpp"

namespace irp {

namespace {

constexpr std::uint64_t kTagPermutation = 11;
constexpr std::uint64_t kTagWeights = 12;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

struct MutableNet {
  MatMap w1;
  VecMap b1;
  MatMap w2;
  VecMap b2;
};

MutableNet mutable_net(double* base, int hidden, int ka, int kb) {
  double* p = base;
  MatMap w1(p, hidden, ka);
  p += static_cast<std::ptrdiff_t>(hidden) * ka;
  VecMap b1(p, hidden);
  p += hidden;
  MatMap w2(p, kb, hidden);
  p += static_cast<std::ptrdiff_t>(kb) * hidden;
  VecMap b2(p, kb);
  return {w1, b1, w2, b2};
}

bool is_permutation_of_range(const std::vector<int>& perm, int d) {
  if (static_cast<int>(perm.size()) != d) return false;
  std::vector<char> seen(static_cast<std::size_t>(d), 0);
  for (int p : perm) {
    if (p < 0 || p >= d || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = 1;
  }
  return true;
}

void permute_rows(const Eigen::MatrixXd& x, const std::vector<int>& perm, Eigen::MatrixXd& u) {
  u.resize(x.rows(), x.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) u.row(static_cast<Eigen::Index>(j)) = x.row(perm[j]);
}

void check_input(const FlowModel& m, const FeatureVector& v) {
  if (v.size() != m.dim()) throw std::invalid_argument("input dimension does not match flow dimension");
  if (!v.allFinite()) throw std::invalid_argument("non-finite flow input");
}

}  // namespace

double soft_clamp(double s, double alpha) { return alpha * (2.0 / std::numbers::pi) * std::atan(s / alpha); }

FlowModel::FlowModel(int dim, int hidden, double clamp_alpha, std::vector<std::vector<int>> permutations,
                     Eigen::VectorXd parameters)
    : dim_(dim), hidden_(hidden), clamp_alpha_(clamp_alpha), permutations_(std::move(permutations)),
      params_(std::move(parameters)) {
  if (dim_ < 2) throw std::invalid_argument("flow dim must be at least 2");
  if (hidden_ < 1) throw std::invalid_argument("flow hidden width must be at least 1");
  if (permutations_.empty()) throw std::invalid_argument("flow needs at least one block");
  if (!(clamp_alpha_ > 0.0) || !std::isfinite(clamp_alpha_)) throw std::invalid_argument("clamp alpha must be positive");
  for (const auto& p : permutations_) {
    if (!is_permutation_of_range(p, dim_)) throw std::invalid_argument("block permutation is not a bijection");
  }
  if (params_.size() != 2 * net_parameter_count() * blocks()) {
    throw std::invalid_argument("parameter count does not match architecture");
  }
  if (!params_.allFinite()) throw std::invalid_argument("non-finite flow parameter");
}

FlowModel FlowModel::init(int dim, int blocks, int hidden, std::uint64_t seed, double clamp_alpha) {
  if (dim < 2) throw std::invalid_argument("flow dim must be at least 2");
  if (blocks < 1) throw std::invalid_argument("flow blocks must be at least 1");
  if (hidden < 1) throw std::invalid_argument("flow hidden width must be at least 1");

  Rng perm_rng(seed, kTagPermutation);
  std::vector<std::vector<int>> perms(static_cast<std::size_t>(blocks));
  for (auto& p : perms) {
    p.resize(static_cast<std::size_t>(dim));
    std::iota(p.begin(), p.end(), 0);
    perm_rng.shuffle(p);
  }

  const int ka = (dim + 1) / 2;
  const int kb = dim / 2;
  const Eigen::Index per_net = static_cast<Eigen::Index>(hidden) * ka + hidden + static_cast<Eigen::Index>(kb) * hidden + kb;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2 * per_net * blocks);
  Rng weight_rng(seed, kTagWeights);
  const double bound = 1.0 / std::sqrt(static_cast<double>(ka));
  for (int b = 0; b < blocks; ++b) {
    for (int net = 0; net < 2; ++net) {
      MutableNet n = mutable_net(params.data() + (2 * b + net) * per_net, hidden, ka, kb);
      for (Eigen::Index j = 0; j < n.w1.cols(); ++j) {
        for (Eigen::Index i = 0; i < n.w1.rows(); ++i) n.w1(i, j) = weight_rng.uniform(-bound, bound);
      }
      for (Eigen::Index i = 0; i < n.b1.size(); ++i) n.b1(i) = weight_rng.uniform(-bound, bound);
    }
  }
  return FlowModel(dim, hidden, clamp_alpha, std::move(perms), std::move(params));
}

Eigen::Index FlowModel::net_parameter_count() const {
  const Eigen::Index h = hidden_;
  return h * active_dim() + h + passive_dim() * h + passive_dim();
}

Eigen::Index FlowModel::net_offset(int block, int net) const { return (2 * block + net) * net_parameter_count(); }

FlowModel::NetView FlowModel::net(int block, int which) const {
  const double* p = params_.data() + net_offset(block, which);
  const int h = hidden_;
  const int ka = active_dim();
  const int kb = passive_dim();
  Eigen::Map<const Eigen::MatrixXd> w1(p, h, ka);
  p += static_cast<std::ptrdiff_t>(h) * ka;
  Eigen::Map<const Eigen::VectorXd> b1(p, h);
  p += h;
  Eigen::Map<const Eigen::MatrixXd> w2(p, kb, h);
  p += static_cast<std::ptrdiff_t>(kb) * h;
  Eigen::Map<const Eigen::VectorXd> b2(p, kb);
  return {w1, b1, w2, b2};
}

bool operator==(const FlowModel& a, const FlowModel& b) {
  return a.dim_ == b.dim_ && a.hidden_ == b.hidden_ && a.clamp_alpha_ == b.clamp_alpha_ &&
         a.permutations_ == b.permutations_ && a.params_.size() == b.params_.size() && a.params_ == b.params_;
}

void forward_batch(const FlowModel& m, const Eigen::MatrixXd& y, Eigen::MatrixXd& z, Eigen::VectorXd& log_det) {
  const int ka = m.active_dim();
  const int kb = m.passive_dim();
  const double alpha = m.clamp_alpha();
  Eigen::MatrixXd x = y;
  Eigen::MatrixXd u;
  log_det = Eigen::VectorXd::Zero(y.cols());
  for (int b = 0; b < m.blocks(); ++b) {
    permute_rows(x, m.permutations()[static_cast<std::size_t>(b)], u);
    const auto sn = m.net(b, 0);
    const auto tn = m.net(b, 1);
    const auto ua = u.topRows(ka);
    const Eigen::MatrixXd hs = ((sn.w1 * ua).colwise() + sn.b1).array().tanh().matrix();
    const Eigen::MatrixXd ht = ((tn.w1 * ua).colwise() + tn.b1).array().tanh().matrix();
    const Eigen::MatrixXd s = ((sn.w2 * hs).colwise() + sn.b2).unaryExpr([alpha](double v) { return soft_clamp(v, alpha); });
    const Eigen::MatrixXd t = (tn.w2 * ht).colwise() + tn.b2;
    u.bottomRows(kb).array() = u.bottomRows(kb).array() * s.array().exp() + t.array();
    log_det += s.colwise().sum().transpose();
    x.swap(u);
  }
  z = std::move(x);
}

ForwardResult forward(const FlowModel& m, const FeatureVector& y) {
  check_input(m, y);
  Eigen::MatrixXd z;
  Eigen::VectorXd ld;
  forward_batch(m, y, z, ld);
  return {z.col(0), ld(0)};
}

FeatureVector inverse(const FlowModel& m, const FeatureVector& z) {
  check_input(m, z);
  const int ka = m.active_dim();
  const int kb = m.passive_dim();
  const double alpha = m.clamp_alpha();
  FeatureVector x = z;
  FeatureVector u(m.dim());
  for (int b = m.blocks() - 1; b >= 0; --b) {
    const auto sn = m.net(b, 0);
    const auto tn = m.net(b, 1);
    const Eigen::VectorXd ua = x.head(ka);
    const Eigen::VectorXd hs = (sn.w1 * ua + sn.b1).array().tanh().matrix();
    const Eigen::VectorXd ht = (tn.w1 * ua + tn.b1).array().tanh().matrix();
    const Eigen::VectorXd s = (sn.w2 * hs + sn.b2).unaryExpr([alpha](double v) { return soft_clamp(v, alpha); });
    const Eigen::VectorXd t = tn.w2 * ht + tn.b2;
    x.tail(kb) = ((x.tail(kb) - t).array() * (-s).array().exp()).matrix();
    const auto& perm = m.permutations()[static_cast<std::size_t>(b)];
    for (std::size_t j = 0; j < perm.size(); ++j) u(perm[j]) = x(static_cast<Eigen::Index>(j));
    x.swap(u);
  }
  return x;
}

double log_prior(const FeatureVector& z) { return -static_cast<double>(z.size()) * kHalfLog2Pi - 0.5 * z.squaredNorm(); }

double log_prob(const FlowModel& m, const FeatureVector& y) {
  const ForwardResult r = forward(m, y);
  return log_prior(r.z) + r.log_det;
}

double GradientWorkspace::evaluate(const FlowModel& m, const Eigen::MatrixXd& batch, Eigen::VectorXd& grad) {
  const int nb = m.blocks();
  const int ka = m.active_dim();
  const int kb = m.passive_dim();
  const int h = m.hidden();
  const double alpha = m.clamp_alpha();
  const Eigen::Index n = batch.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  cache_.resize(static_cast<std::size_t>(nb));
  x_ = batch;
  double total_log_det = 0.0;
  for (int b = 0; b < nb; ++b) {
    BlockCache& c = cache_[static_cast<std::size_t>(b)];
    permute_rows(x_, m.permutations()[static_cast<std::size_t>(b)], c.u);
    const auto sn = m.net(b, 0);
    const auto tn = m.net(b, 1);
    const auto ua = c.u.topRows(ka);
    c.hs.noalias() = sn.w1 * ua;
    c.hs = (c.hs.colwise() + sn.b1).array().tanh().matrix();
    c.ht.noalias() = tn.w1 * ua;
    c.ht = (c.ht.colwise() + tn.b1).array().tanh().matrix();
    c.s_raw.noalias() = sn.w2 * c.hs;
    c.s_raw.colwise() += sn.b2;
    gs_ = c.s_raw.unaryExpr([alpha](double v) { return soft_clamp(v, alpha); });
    total_log_det += gs_.sum();
    c.scale = gs_.array().exp().matrix();
    gt_.noalias() = tn.w2 * c.ht;
    gt_.colwise() += tn.b2;
    x_ = c.u;
    x_.bottomRows(kb).array() = c.u.bottomRows(kb).array() * c.scale.array() + gt_.array();
  }

  const double loss = static_cast<double>(m.dim()) * kHalfLog2Pi + 0.5 * x_.squaredNorm() * inv_n - total_log_det * inv_n;

  grad.setZero(m.parameter_count());
  g_ = x_ * inv_n;
  const double two_over_pi = 2.0 / std::numbers::pi;
  for (int b = nb - 1; b >= 0; --b) {
    const BlockCache& c = cache_[static_cast<std::size_t>(b)];
    const auto sn = m.net(b, 0);
    const auto tn = m.net(b, 1);
    MutableNet gsn = mutable_net(grad.data() + m.net_offset(b, 0), h, ka, kb);
    MutableNet gtn = mutable_net(grad.data() + m.net_offset(b, 1), h, ka, kb);
    const auto ua = c.u.topRows(ka);
    const auto ub = c.u.bottomRows(kb);
    const auto gvb = g_.bottomRows(kb);

    // d loss / d s_raw: the coupling term plus the -1/n per-sample log_det term,
    // chained through the soft clamp.
    gs_ = ((gvb.array() * ub.array() * c.scale.array() - inv_n) *
           (two_over_pi / (1.0 + (c.s_raw.array() / alpha).square())))
              .matrix();
    gu_.resize(m.dim(), n);
    gu_.topRows(ka) = g_.topRows(ka);
    gu_.bottomRows(kb).array() = gvb.array() * c.scale.array();

    gsn.w2.noalias() = gs_ * c.hs.transpose();
    gsn.b2 = gs_.rowwise().sum();
    gh_.noalias() = sn.w2.transpose() * gs_;
    gh_.array() *= 1.0 - c.hs.array().square();
    gsn.w1.noalias() = gh_ * ua.transpose();
    gsn.b1 = gh_.rowwise().sum();
    gu_.topRows(ka).noalias() += sn.w1.transpose() * gh_;

    gtn.w2.noalias() = gvb * c.ht.transpose();
    gtn.b2 = gvb.rowwise().sum();
    gh_.noalias() = tn.w2.transpose() * gvb;
    gh_.array() *= 1.0 - c.ht.array().square();
    gtn.w1.noalias() = gh_ * ua.transpose();
    gtn.b1 = gh_.rowwise().sum();
    gu_.topRows(ka).noalias() += tn.w1.transpose() * gh_;

    const auto& perm = m.permutations()[static_cast<std::size_t>(b)];
    g_.resize(m.dim(), n);
    for (std::size_t j = 0; j < perm.size(); ++j) g_.row(perm[j]) = gu_.row(static_cast<Eigen::Index>(j));
  }
  return loss;
}

NllGrad nll_and_grad(const FlowModel& m, std::span<const FeatureVector> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Eigen::MatrixXd cols(m.dim(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_input(m, batch[i]);
    cols.col(static_cast<Eigen::Index>(i)) = batch[i];
  }
  NllGrad out;
  GradientWorkspace ws;
  out.loss = ws.evaluate(m, cols, out.grad);
  return out;
}

// ---- checkpoint ----

void write_checkpoint(std::ostream& out, const FlowModel& m) {
  out << "flow-checkpoint v1\n";
  out << "dim " << m.dim() << " blocks " << m.blocks() << " hidden " << m.hidden() << " clamp "
      << detail::format_g(m.clamp_alpha(), 17) << '\n';
  for (const auto& p : m.permutations()) {
    out << "perm";
    for (int i : p) out << ' ' << i;
    out << '\n';
  }
  out << "params " << m.parameter_count() << '\n';
  for (Eigen::Index i = 0; i < m.parameter_count(); ++i) out << detail::format_g(m.parameters()(i), 17) << '\n';
}

FlowModel read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  const auto next = [&]() -> std::string_view {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of checkpoint");
    ++line_no;
    return detail::trim(line);
  };
  const auto words = [](std::string_view s) {
    std::vector<std::string_view> out;
    for (auto w : detail::split(s, ' ')) {
      if (!w.empty()) out.push_back(w);
    }
    return out;
  };

  if (next() != "flow-checkpoint v1") throw ParseError(line_no, "not a flow checkpoint");
  const auto header = words(next());
  if (header.size() != 8 || header[0] != "dim" || header[2] != "blocks" || header[4] != "hidden" || header[6] != "clamp") {
    throw ParseError(line_no, "malformed header");
  }
  const auto dim = detail::parse_number<int>(header[1]);
  const auto blocks = detail::parse_number<int>(header[3]);
  const auto hidden = detail::parse_number<int>(header[5]);
  const auto clamp = detail::parse_number<double>(header[7]);
  if (!dim || !blocks || !hidden || !clamp || *dim < 2 || *blocks < 1 || *hidden < 1) {
    throw ParseError(line_no, "bad header value");
  }

  std::vector<std::vector<int>> perms;
  for (int b = 0; b < *blocks; ++b) {
    const auto w = words(next());
    if (w.empty() || w[0] != "perm" || static_cast<int>(w.size()) != *dim + 1) throw ParseError(line_no, "malformed permutation");
    std::vector<int> p;
    for (std::size_t i = 1; i < w.size(); ++i) {
      const auto v = detail::parse_number<int>(w[i]);
      if (!v) throw ParseError(line_no, "bad permutation index");
      p.push_back(*v);
    }
    if (!is_permutation_of_range(p, *dim)) throw ParseError(line_no, "permutation is not a bijection");
    perms.push_back(std::move(p));
  }

  const auto pw = words(next());
  if (pw.size() != 2 || pw[0] != "params") throw ParseError(line_no, "expected params line");
  const auto count = detail::parse_number<Eigen::Index>(pw[1]);
  if (!count || *count < 0) throw ParseError(line_no, "bad parameter count");
  Eigen::VectorXd params(*count);
  for (Eigen::Index i = 0; i < *count; ++i) {
    const auto v = detail::parse_number<double>(next());
    if (!v || !std::isfinite(*v)) throw ParseError(line_no, "bad parameter value");
    params(i) = *v;
  }
  try {
    return FlowModel(*dim, *hidden, *clamp, std::move(perms), std::move(params));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

void save_checkpoint(const FlowModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, m);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FlowModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace irp
