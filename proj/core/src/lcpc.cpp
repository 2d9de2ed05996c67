#include "tta/lcpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "tta/error.hpp"

namespace tta {
namespace {

// Transformed prototypes, shared by every forward/backward pass of a call.
struct ProtoCache {
  std::vector<std::vector<Vec64>> v;    // [layer][class] -> d_t
  std::vector<std::vector<double>> vn;  // norms of the above
};

// Everything the backward pass needs about one point's forward pass.
struct PointForward {
  std::vector<Vec64> u;           // [layer] transformed feature
  std::vector<double> un;         // norms of the above
  std::vector<Vec64> raw;         // [layer][class] unclamped cosine
  std::vector<ProbDist> p;        // [layer] softmax over clamped cosines
  ProbDist mean;
};

void check_ensemble(const TransformEnsemble& ens) {
  if (ens.layers.empty())
    throw ArgumentError("lcpc: ensemble has no layers");
  for (const auto& layer : ens.layers) {
    if (layer.weight.rows != ens.output_dim || layer.weight.cols != ens.input_dim ||
        layer.bias.size() != ens.output_dim) {
      throw ArgumentError("lcpc: layer shape does not match ensemble dims");
    }
  }
}

ProtoCache make_proto_cache(const TransformEnsemble& ens,
                            const std::vector<Vec64>& prototypes) {
  if (prototypes.empty()) throw ArgumentError("lcpc: no prototypes");
  for (const auto& c : prototypes) {
    if (c.size() != ens.input_dim)
      throw ArgumentError("lcpc: prototype dim does not match ensemble input dim");
  }
  const std::size_t nl = ens.layers.size();
  ProtoCache cache;
  cache.v.resize(nl);
  cache.vn.resize(nl);
  for (std::size_t r = 0; r < nl; ++r) {
    cache.v[r].reserve(prototypes.size());
    cache.vn[r].reserve(prototypes.size());
    for (const auto& c : prototypes) {
      Vec64 vk = matvec(ens.layers[r].weight, c);
      for (std::size_t j = 0; j < vk.size(); ++j) vk[j] += ens.layers[r].bias[j];
      if (!all_finite(vk))
        throw NumericError("lcpc: transformed prototype is not finite");
      cache.vn[r].push_back(norm(vk));
      cache.v[r].push_back(std::move(vk));
    }
  }
  return cache;
}

PointForward forward_point(const TransformEnsemble& ens, const ProtoCache& cache,
                           const Vec64& x) {
  if (x.size() != ens.input_dim)
    throw ArgumentError("lcpc: feature dim does not match ensemble input dim");
  const std::size_t nl = ens.layers.size();
  const std::size_t c = cache.v[0].size();
  PointForward fw;
  fw.u.resize(nl);
  fw.un.resize(nl);
  fw.raw.resize(nl);
  fw.p.resize(nl);
  Vec64 mean(c, 0.0);
  for (std::size_t r = 0; r < nl; ++r) {
    Vec64 u = matvec(ens.layers[r].weight, x);
    for (std::size_t j = 0; j < u.size(); ++j) u[j] += ens.layers[r].bias[j];
    if (!all_finite(u))
      throw NumericError("lcpc: transformed feature is not finite");
    const double un = norm(u);
    const double abar = std::max(un, kEps);
    Vec64 sims(c);
    fw.raw[r].resize(c);
    for (std::size_t k = 0; k < c; ++k) {
      const double bbar = std::max(cache.vn[r][k], kEps);
      const double s_raw = dot(u, cache.v[r][k]) / (abar * bbar);
      fw.raw[r][k] = s_raw;
      sims[k] = std::clamp(s_raw, -1.0, 1.0);
    }
    // inf/inf in the ratio above can yield NaN while u itself is finite
    if (!all_finite(sims))
      throw NumericError("lcpc: cosine similarity is not finite");
    fw.p[r] = softmax(sims);
    for (std::size_t k = 0; k < c; ++k) mean[k] += fw.p[r][k] / double(nl);
    fw.u[r] = std::move(u);
    fw.un[r] = un;
  }
  fw.mean = ProbDist{std::move(mean)};
  return fw;
}

// Accumulates d(loss)/d(params) for one point given the upstream gradient
// on its mean prediction. Gradients w.r.t. transformed prototypes are
// collected into proto_grad and folded into the parameter gradients once,
// after all points, because the prototypes are shared.
void backprop_point(const TransformEnsemble& ens, const ProtoCache& cache,
                    const Vec64& x, const PointForward& fw, const Vec64& g_mean,
                    LcpcGradients& grads,
                    std::vector<std::vector<Vec64>>& proto_grad) {
  const std::size_t nl = ens.layers.size();
  const std::size_t c = cache.v[0].size();
  const std::size_t d_t = ens.output_dim;
  const std::size_t d = ens.input_dim;
  Vec64 ds(c);
  Vec64 du(d_t);
  for (std::size_t r = 0; r < nl; ++r) {
    const auto& p = fw.p[r].probs;
    // softmax backward; upstream on this layer's prediction is g_mean / nl
    double hp = 0.0;
    for (std::size_t k = 0; k < c; ++k) hp += (g_mean[k] / double(nl)) * p[k];
    for (std::size_t k = 0; k < c; ++k)
      ds[k] = p[k] * (g_mean[k] / double(nl) - hp);

    const Vec64& u = fw.u[r];
    const double un = fw.un[r];
    const double abar = std::max(un, kEps);
    std::fill(du.begin(), du.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      const double s_raw = fw.raw[r][k];
      if (s_raw < -1.0 || s_raw > 1.0) continue;  // clamp is flat outside
      const double g = ds[k];
      if (g == 0.0) continue;
      const Vec64& v = cache.v[r][k];
      const double vn = cache.vn[r][k];
      const double bbar = std::max(vn, kEps);
      const double inv_ab = 1.0 / (abar * bbar);
      for (std::size_t j = 0; j < d_t; ++j) du[j] += g * v[j] * inv_ab;
      if (un > kEps) {
        const double coef = g * s_raw / (un * abar);
        for (std::size_t j = 0; j < d_t; ++j) du[j] -= coef * u[j];
      }
      Vec64& pg = proto_grad[r][k];
      for (std::size_t j = 0; j < d_t; ++j) pg[j] += g * u[j] * inv_ab;
      if (vn > kEps) {
        const double coef = g * s_raw / (vn * bbar);
        for (std::size_t j = 0; j < d_t; ++j) pg[j] -= coef * v[j];
      }
    }
    Mat64& gw = grads.weight[r];
    Vec64& gb = grads.bias[r];
    for (std::size_t j = 0; j < d_t; ++j) {
      if (du[j] == 0.0) continue;
      gb[j] += du[j];
      for (std::size_t col = 0; col < d; ++col) gw.at(j, col) += du[j] * x[col];
    }
  }
}

struct BatchForward {
  std::vector<PointForward> sample;
  std::vector<ProbDist> targets;             // softmax of base logits
  std::vector<char> confident;
  std::vector<std::vector<ProbDist>> q;      // consistency targets per sample
  std::vector<std::vector<PointForward>> nbr;  // only in through mode
  LossTerms terms;
};

BatchForward run_batch(const TransformEnsemble& ens, const ProtoCache& cache,
                       std::span<const TrainingSample> batch,
                       const std::vector<Vec64>& prototypes, double conf,
                       double alpha, bool through) {
  if (batch.empty()) throw ArgumentError("lcpc: empty batch");
  const std::size_t c = prototypes.size();
  const std::size_t b = batch.size();
  BatchForward bf;
  bf.sample.reserve(b);
  bf.targets.reserve(b);
  bf.confident.resize(b, 0);
  bf.q.resize(b);
  if (through) bf.nbr.resize(b);

  std::size_t n_conf = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const TrainingSample& ts = batch[i];
    if (ts.base_logits.size() != c)
      throw ArgumentError("lcpc: base logit count does not match class count");
    bf.sample.push_back(forward_point(ens, cache, ts.feature));
    bf.targets.push_back(softmax(ts.base_logits));
    const double top = bf.targets[i][argmax(bf.targets[i].probs)];
    if (top > conf) {
      bf.confident[i] = 1;
      ++n_conf;
    }
    if (through) {
      bf.nbr[i].reserve(ts.neighbor_features.size());
      bf.q[i].reserve(ts.neighbor_features.size());
      for (const auto& nf : ts.neighbor_features) {
        bf.nbr[i].push_back(forward_point(ens, cache, nf));
        bf.q[i].push_back(bf.nbr[i].back().mean);
      }
    } else {
      for (const auto& np : ts.neighbor_preds) {
        if (np.size() != c)
          throw ArgumentError("lcpc: neighbor prediction size mismatch");
        bf.q[i].push_back(np);
      }
    }
  }

  double self_sum = 0.0;
  double cons_sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (bf.confident[i])
      self_sum += soft_cross_entropy(bf.targets[i], bf.sample[i].mean);
    for (const auto& q : bf.q[i])
      cons_sum += soft_cross_entropy(q, bf.sample[i].mean);
  }
  bf.terms.self_training = n_conf > 0 ? self_sum / double(n_conf) : 0.0;
  bf.terms.consistency = cons_sum / double(b);
  bf.terms.total = bf.terms.self_training + alpha * bf.terms.consistency;
  bf.terms.confident = n_conf;
  if (!std::isfinite(bf.terms.total))
    throw NumericError("lcpc: loss is not finite");
  return bf;
}

}  // namespace

TransformEnsemble TransformEnsemble::random_init(std::size_t d, std::size_t d_t,
                                                 std::size_t n_layers,
                                                 std::uint64_t seed) {
  if (d == 0 || d_t == 0 || n_layers == 0)
    throw ConfigError("TransformEnsemble: dims and layer count must be positive");
  TransformEnsemble ens;
  ens.input_dim = d;
  ens.output_dim = d_t;
  ens.layers.resize(n_layers);
  const double bound = 1.0 / std::sqrt(double(d));
  for (std::size_t r = 0; r < n_layers; ++r) {
    std::mt19937_64 rng(mix_seed(seed, r));
    std::uniform_real_distribution<double> uni(-bound, bound);
    TransformLayer& layer = ens.layers[r];
    layer.weight = Mat64(d_t, d);
    for (double& w : layer.weight.values) w = uni(rng);
    layer.bias.assign(d_t, 0.0);
  }
  return ens;
}

TransformEnsemble TransformEnsemble::identity_fixture(std::size_t d) {
  if (d == 0) throw ConfigError("TransformEnsemble: dim must be positive");
  TransformEnsemble ens;
  ens.input_dim = d;
  ens.output_dim = d;
  ens.layers.resize(1);
  ens.layers[0].weight = Mat64(d, d);
  for (std::size_t j = 0; j < d; ++j) ens.layers[0].weight.at(j, j) = 1.0;
  ens.layers[0].bias.assign(d, 0.0);
  return ens;
}

std::size_t TransformEnsemble::param_count() const {
  return layers.size() * (output_dim * input_dim + output_dim);
}

Vec64 TransformEnsemble::flatten_params() const {
  Vec64 flat;
  flat.reserve(param_count());
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weight.values.begin(), layer.weight.values.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void TransformEnsemble::set_params(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw ArgumentError("TransformEnsemble: flat parameter size mismatch");
  std::size_t off = 0;
  for (auto& layer : layers) {
    std::memcpy(layer.weight.values.data(), flat.data() + off,
                layer.weight.values.size() * sizeof(double));
    off += layer.weight.values.size();
    std::memcpy(layer.bias.data(), flat.data() + off,
                layer.bias.size() * sizeof(double));
    off += layer.bias.size();
  }
}

PredictResult predict(const TransformEnsemble& ens, const Vec64& feature,
                      const std::vector<Vec64>& prototypes) {
  check_ensemble(ens);
  const ProtoCache cache = make_proto_cache(ens, prototypes);
  PointForward fw = forward_point(ens, cache, feature);
  return {std::move(fw.mean), std::move(fw.p)};
}

std::pair<double, std::size_t> lcpc_loss(std::span<const Vec64> base_logits,
                                         std::span<const ProbDist> preds,
                                         double conf) {
  if (base_logits.size() != preds.size())
    throw ArgumentError("lcpc_loss: logit/prediction count mismatch");
  double sum = 0.0;
  std::size_t n_conf = 0;
  for (std::size_t i = 0; i < base_logits.size(); ++i) {
    const ProbDist t = softmax(base_logits[i]);
    if (t[argmax(t.probs)] > conf) {
      sum += soft_cross_entropy(t, preds[i]);
      ++n_conf;
    }
  }
  return {n_conf > 0 ? sum / double(n_conf) : 0.0, n_conf};
}

Vec64 LcpcGradients::flatten() const {
  Vec64 flat;
  for (std::size_t r = 0; r < weight.size(); ++r) {
    flat.insert(flat.end(), weight[r].values.begin(), weight[r].values.end());
    flat.insert(flat.end(), bias[r].begin(), bias[r].end());
  }
  return flat;
}

LossTerms lcpc_total_loss(const TransformEnsemble& ens,
                          std::span<const TrainingSample> batch,
                          const std::vector<Vec64>& prototypes, double conf,
                          double alpha, bool grad_through_neighbors) {
  check_ensemble(ens);
  const ProtoCache cache = make_proto_cache(ens, prototypes);
  return run_batch(ens, cache, batch, prototypes, conf, alpha,
                   grad_through_neighbors)
      .terms;
}

std::pair<LcpcGradients, LossTerms> lcpc_gradients(
    const TransformEnsemble& ens, std::span<const TrainingSample> batch,
    const std::vector<Vec64>& prototypes, double conf, double alpha,
    bool grad_through_neighbors) {
  check_ensemble(ens);
  const ProtoCache cache = make_proto_cache(ens, prototypes);
  const BatchForward bf = run_batch(ens, cache, batch, prototypes, conf, alpha,
                                    grad_through_neighbors);

  const std::size_t nl = ens.layers.size();
  const std::size_t c = prototypes.size();
  const std::size_t b = batch.size();
  LcpcGradients grads;
  grads.weight.assign(nl, Mat64(ens.output_dim, ens.input_dim));
  grads.bias.assign(nl, Vec64(ens.output_dim, 0.0));
  std::vector<std::vector<Vec64>> proto_grad(
      nl, std::vector<Vec64>(c, Vec64(ens.output_dim, 0.0)));

  Vec64 g_mean(c);
  for (std::size_t i = 0; i < b; ++i) {
    const ProbDist& pred = bf.sample[i].mean;
    std::fill(g_mean.begin(), g_mean.end(), 0.0);
    if (bf.confident[i]) {
      for (std::size_t k = 0; k < c; ++k) {
        if (pred[k] > kEps)
          g_mean[k] -= bf.targets[i][k] / pred[k] / double(bf.terms.confident);
      }
    }
    for (const auto& q : bf.q[i]) {
      for (std::size_t k = 0; k < c; ++k) {
        if (pred[k] > kEps) g_mean[k] -= alpha * q[k] / pred[k] / double(b);
      }
    }
    backprop_point(ens, cache, batch[i].feature, bf.sample[i], g_mean, grads,
                   proto_grad);
  }

  if (grad_through_neighbors && alpha != 0.0) {
    Vec64 g_q(c);
    for (std::size_t i = 0; i < b; ++i) {
      const ProbDist& pred = bf.sample[i].mean;
      for (std::size_t k = 0; k < c; ++k)
        g_q[k] = -alpha * std::log(std::max(pred[k], kEps)) / double(b);
      for (std::size_t n = 0; n < bf.nbr[i].size(); ++n) {
        backprop_point(ens, cache, batch[i].neighbor_features[n], bf.nbr[i][n],
                       g_q, grads, proto_grad);
      }
    }
  }

  // fold the shared prototype path into the parameter gradients
  for (std::size_t r = 0; r < nl; ++r) {
    Mat64& gw = grads.weight[r];
    Vec64& gb = grads.bias[r];
    for (std::size_t k = 0; k < c; ++k) {
      const Vec64& pg = proto_grad[r][k];
      const Vec64& proto = prototypes[k];
      for (std::size_t j = 0; j < ens.output_dim; ++j) {
        if (pg[j] == 0.0) continue;
        gb[j] += pg[j];
        for (std::size_t col = 0; col < ens.input_dim; ++col)
          gw.at(j, col) += pg[j] * proto[col];
      }
    }
  }

  for (std::size_t r = 0; r < nl; ++r) {
    if (!all_finite(grads.weight[r].values) || !all_finite(grads.bias[r]))
      throw NumericError("lcpc_gradients: non-finite gradient in layer " +
                         std::to_string(r));
  }
  return {std::move(grads), bf.terms};
}

}  // namespace tta
