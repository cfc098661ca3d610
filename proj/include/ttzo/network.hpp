#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ttzo/rng.hpp"
#include "ttzo/tensor_train.hpp"

namespace ttzo {

enum class Act { identity, relu, sine };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::sine: return "sine";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "relu") return Act::relu;
  if (s == "sine") return Act::sine;
  throw std::invalid_argument("unknown activation: " + s);
}

// y = W^T x + b with W stored (in x out).
struct DenseLinear {
  Eigen::MatrixXd W;
  Eigen::VectorXd bias;
};

struct Layer {
  std::variant<DenseLinear, TTLinear> op;
  Act act = Act::identity;

  long in_dim() const {
    if (const auto* d = std::get_if<DenseLinear>(&op)) return d->W.rows();
    return std::get<TTLinear>(op).shape.rows();
  }
  long out_dim() const {
    if (const auto* d = std::get_if<DenseLinear>(&op)) return d->W.cols();
    return std::get<TTLinear>(op).shape.cols();
  }
  long param_count() const {
    if (const auto* d = std::get_if<DenseLinear>(&op))
      return d->W.size() + d->bias.size();
    return parameter_count(std::get<TTLinear>(op));
  }
};

struct Network {
  std::vector<Layer> layers;

  long input_dim() const { return layers.front().in_dim(); }
  long output_dim() const { return layers.back().out_dim(); }

  long param_count() const {
    long total = 0;
    for (const auto& l : layers) total += l.param_count();
    return total;
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("Network: no layers");
    for (size_t i = 0; i + 1 < layers.size(); ++i)
      if (layers[i].out_dim() != layers[i + 1].in_dim())
        throw std::invalid_argument("Network: dimension mismatch between layers " +
                                    std::to_string(i) + " and " + std::to_string(i + 1));
  }
};

inline void apply_act(Act act, Eigen::MatrixXd& z) {
  switch (act) {
    case Act::identity: break;
    case Act::relu: z = z.cwiseMax(0.0); break;
    case Act::sine: z = z.array().sin().matrix(); break;
  }
}

// Linear part of a layer (no activation).
inline Eigen::MatrixXd layer_linear(const Layer& layer, const Eigen::MatrixXd& X) {
  if (X.cols() != layer.in_dim())
    throw std::invalid_argument("forward: input width mismatch");
  if (const auto* d = std::get_if<DenseLinear>(&layer.op)) {
    Eigen::MatrixXd Z = X * d->W;
    Z.rowwise() += d->bias.transpose();
    return Z;
  }
  return tt_matvec_batch(std::get<TTLinear>(layer.op), X);
}

inline Eigen::MatrixXd layer_forward(const Layer& layer, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z = layer_linear(layer, X);
  apply_act(layer.act, Z);
  return Z;
}

// Reference to one scalar parameter of a layer, addressed in pack() order.
inline double& layer_param_ref(Layer& layer, long off) {
  if (off < 0 || off >= layer.param_count())
    throw std::out_of_range("layer_param_ref: offset out of range");
  if (auto* d = std::get_if<DenseLinear>(&layer.op)) {
    const long ws = d->W.size();
    if (off < ws) return d->W(off / d->W.cols(), off % d->W.cols());
    return d->bias[off - ws];
  }
  auto& tt = std::get<TTLinear>(layer.op);
  for (auto& core : tt.cores) {
    if (off < core.size()) return core[off];
    off -= core.size();
  }
  return tt.bias[off];
}

namespace detail {

inline Eigen::MatrixXd forward_block(const Network& net, Eigen::MatrixXd X) {
  for (const auto& layer : net.layers) X = layer_forward(layer, X);
  return X;
}

}  // namespace detail

// X has one sample per row. Rows are processed in slices so the sweep
// buffers of wide TT layers stay bounded for very large batches; each row's
// result is unchanged by the slicing.
inline Eigen::MatrixXd forward_batch(const Network& net, Eigen::MatrixXd X) {
  constexpr long kRowsPerSlice = 8192;
  if (X.rows() <= kRowsPerSlice) return detail::forward_block(net, std::move(X));
  Eigen::MatrixXd Y(X.rows(), net.output_dim());
  for (long start = 0; start < X.rows(); start += kRowsPerSlice) {
    const long count = std::min(kRowsPerSlice, X.rows() - start);
    Y.middleRows(start, count) = detail::forward_block(net, X.middleRows(start, count));
  }
  return Y;
}

inline Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
  return forward_batch(net, x.transpose()).row(0);
}

// Flat parameter order: layers in sequence; for a dense layer the weight
// matrix row-major (input index major) then the bias; for a TT layer the
// cores in chain order, each flat in its (r, m, n, r) row-major layout,
// then the bias.
inline Eigen::VectorXd pack(const Network& net) {
  Eigen::VectorXd v(net.param_count());
  long off = 0;
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLinear>(&layer.op)) {
      Eigen::Map<RowMat>(v.data() + off, d->W.rows(), d->W.cols()) = d->W;
      off += d->W.size();
      v.segment(off, d->bias.size()) = d->bias;
      off += d->bias.size();
    } else {
      const TTLinear& tt = std::get<TTLinear>(layer.op);
      for (const auto& core : tt.cores) {
        v.segment(off, core.size()) = core;
        off += core.size();
      }
      v.segment(off, tt.bias.size()) = tt.bias;
      off += tt.bias.size();
    }
  }
  return v;
}

inline void unpack(Network& net, const Eigen::VectorXd& v) {
  if (v.size() != net.param_count())
    throw std::invalid_argument("unpack: expected " + std::to_string(net.param_count()) +
                                " parameters, got " + std::to_string(v.size()));
  long off = 0;
  for (auto& layer : net.layers) {
    if (auto* d = std::get_if<DenseLinear>(&layer.op)) {
      d->W = Eigen::Map<const RowMat>(v.data() + off, d->W.rows(), d->W.cols());
      off += d->W.size();
      d->bias = v.segment(off, d->bias.size());
      off += d->bias.size();
    } else {
      TTLinear& tt = std::get<TTLinear>(layer.op);
      for (auto& core : tt.cores) {
        core = v.segment(off, core.size());
        off += core.size();
      }
      tt.bias = v.segment(off, tt.bias.size());
      off += tt.bias.size();
    }
  }
}

inline DenseLinear dense_glorot(long in, long out, std::mt19937_64& rng) {
  DenseLinear d;
  const double s = std::sqrt(2.0 / static_cast<double>(in + out));
  std::normal_distribution<double> gauss(0.0, s);
  d.W = Eigen::MatrixXd::NullaryExpr(in, out, [&](Eigen::Index, Eigen::Index) {
    return gauss(rng);
  });
  d.bias = Eigen::VectorXd::Zero(out);
  return d;
}

inline Network mnist_mlp_dense(std::mt19937_64& rng) {
  Network net;
  net.layers.push_back({dense_glorot(784, 1024, rng), Act::relu});
  net.layers.push_back({dense_glorot(1024, 10, rng), Act::identity});
  return net;
}

inline Network mnist_mlp_tt(int rank, std::mt19937_64& rng) {
  TTShape l1{{7, 4, 4, 7}, {8, 4, 4, 8}, {1, rank, rank, rank, 1}};
  TTShape l2{{8, 4, 4, 8}, {1, 5, 2, 1}, {1, rank, rank, rank, 1}};
  Network net;
  net.layers.push_back({tt_random(l1, rng), Act::relu});
  net.layers.push_back({tt_random(l2, rng), Act::identity});
  return net;
}

// u = f(x, t): input D+1, two sine hidden layers, scalar output.
inline Network hjb_mlp_dense(int D, int hidden, std::mt19937_64& rng) {
  Network net;
  net.layers.push_back({dense_glorot(D + 1, hidden, rng), Act::sine});
  net.layers.push_back({dense_glorot(hidden, hidden, rng), Act::sine});
  net.layers.push_back({dense_glorot(hidden, 1, rng), Act::identity});
  return net;
}

namespace detail {

// (a, b) with a*b = n and a the largest divisor <= sqrt(n).
inline std::pair<int, int> fold2(int n) {
  int a = 1;
  for (int d = 1; static_cast<long>(d) * d <= n; ++d)
    if (n % d == 0) a = d;
  return {a, n / a};
}

}  // namespace detail

inline Network hjb_mlp_tt(int D, int hidden, int rank, std::mt19937_64& rng) {
  Network net;
  const int din = D + 1;
  if (hidden == 768 && din % 3 == 0) {
    // Three-factor fold keeps the 768x768 middle layer small.
    std::vector<int> fin{1, 3, din / 3};
    std::vector<int> fh{8, 8, 12};
    TTShape w1{fin, fh, {1, rank, rank, 1}};
    TTShape w2{fh, {12, 8, 8}, {1, rank, rank, 1}};
    TTShape w3{{12, 8, 8}, {1, 1, 1}, {1, rank, rank, 1}};
    net.layers.push_back({tt_random(w1, rng), Act::sine});
    net.layers.push_back({tt_random(w2, rng), Act::sine});
    net.layers.push_back({tt_random(w3, rng), Act::identity});
  } else {
    const auto [h1, h2] = detail::fold2(hidden);
    TTShape w1{{1, din}, {h1, h2}, {1, rank, 1}};
    TTShape w2{{h1, h2}, {h1, h2}, {1, rank, 1}};
    TTShape w3{{h1, h2}, {1, 1}, {1, rank, 1}};
    net.layers.push_back({tt_random(w1, rng), Act::sine});
    net.layers.push_back({tt_random(w2, rng), Act::sine});
    net.layers.push_back({tt_random(w3, rng), Act::identity});
  }
  net.validate();
  return net;
}

}  // namespace ttzo
