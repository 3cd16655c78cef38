#include "simclf/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "simclf/errors.hpp"
#include "simclf/io.hpp"

namespace simclf {
namespace {

constexpr std::string_view kCheckpointMagic = "SCLF";

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

std::vector<TokenId> strip_padding(const EncoderParams& params,
                                   std::span<const TokenId> tokens) {
  if (tokens.size() > params.config.max_input_length) {
    throw InputError("sequence length " + std::to_string(tokens.size()) +
                     " exceeds max_input_length " +
                     std::to_string(params.config.max_input_length));
  }
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.config.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " out of range for vocab size " +
                       std::to_string(params.config.vocab_size));
    }
    if (t != kPadId) ids.push_back(t);
  }
  if (ids.empty()) throw InputError("empty sequence");
  return ids;
}

void row_softmax(Eigen::MatrixXd& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

// Fills everything in `e` except `ids`.
Embedding forward(const EncoderParams& params, Stage stage, EncoderTape::Entry& e) {
  const auto length = static_cast<Eigen::Index>(e.ids.size());
  const auto dim = static_cast<Eigen::Index>(params.config.embed_dim);
  e.x.resize(length, dim);
  for (Eigen::Index i = 0; i < length; ++i) e.x.row(i) = params.embedding.row(e.ids[i]);

  if (params.has_attention()) {
    e.q.noalias() = e.x * params.query;
    e.k.noalias() = e.x * params.key;
    e.v.noalias() = e.x * params.value;
    e.attn.noalias() = e.q * e.k.transpose();
    e.attn /= std::sqrt(static_cast<double>(dim));
    row_softmax(e.attn);
    // mean_i (x_i + sum_j a_ij v_j) = mean(x) + (column means of A) * V
    const Eigen::RowVectorXd attn_mean = e.attn.colwise().mean();
    e.pooled = (e.x.colwise().mean() + attn_mean * e.v).transpose();
  } else {
    e.pooled = e.x.colwise().mean().transpose();
  }

  Eigen::VectorXd hidden;
  if (stage == Stage::kTraining && params.has_head()) {
    hidden = params.head_weight.transpose() * e.pooled + params.head_bias.row(0).transpose();
  } else {
    hidden = e.pooled;
  }
  e.norm = hidden.norm();
  if (!(e.norm > 0.0) || !std::isfinite(e.norm)) {
    throw TrainingError("representation has zero or non-finite norm");
  }
  e.z = hidden / e.norm;
  return e.z;
}

void accumulate(const EncoderParams& params, const EncoderTape::Entry& e,
                const Eigen::VectorXd& upstream, EncoderGradients& grads) {
  // d(h/|h|)/dh = (I - z z^T) / |h|
  const Eigen::VectorXd g_hidden = (upstream - e.z * e.z.dot(upstream)) / e.norm;

  Eigen::VectorXd g_pooled;
  if (params.has_head()) {
    grads.head_weight.noalias() += e.pooled * g_hidden.transpose();
    grads.head_bias.row(0) += g_hidden.transpose();
    g_pooled = params.head_weight * g_hidden;
  } else {
    g_pooled = g_hidden;
  }

  const auto length = static_cast<Eigen::Index>(e.ids.size());
  const double inv_len = 1.0 / static_cast<double>(length);
  // Every row of dL/dH equals g_pooled / L.
  const Eigen::RowVectorXd g_row = g_pooled.transpose() * inv_len;
  Eigen::MatrixXd g_x = g_row.replicate(length, 1);

  if (params.has_attention()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(params.config.embed_dim));
    // dL/dV = A^T dL/dH; rows of dL/dH are identical.
    const Eigen::VectorXd attn_colsum = e.attn.colwise().sum().transpose();
    const Eigen::MatrixXd g_v = attn_colsum * g_row;
    // dL/dA(i,j) = g_row . v_j, identical for every i.
    const Eigen::RowVectorXd g_a_row = (e.v * g_row.transpose()).transpose();
    Eigen::MatrixXd g_s(length, length);
    for (Eigen::Index i = 0; i < length; ++i) {
      const double centre = e.attn.row(i).dot(g_a_row);
      g_s.row(i) = e.attn.row(i).array() * (g_a_row.array() - centre);
    }
    g_s *= scale;
    const Eigen::MatrixXd g_q = g_s * e.k;
    const Eigen::MatrixXd g_k = g_s.transpose() * e.q;
    grads.query.noalias() += e.x.transpose() * g_q;
    grads.key.noalias() += e.x.transpose() * g_k;
    grads.value.noalias() += e.x.transpose() * g_v;
    g_x.noalias() += g_q * params.query.transpose();
    g_x.noalias() += g_k * params.key.transpose();
    g_x.noalias() += g_v * params.value.transpose();
  }

  for (Eigen::Index i = 0; i < length; ++i) grads.embedding.row(e.ids[i]) += g_x.row(i);
}

void write_config(ByteWriter& w, const EncoderConfig& c) {
  w.u64(c.vocab_size);
  w.u64(c.embed_dim);
  w.u8(c.use_attention ? 1 : 0);
  w.u8(c.use_projection_head ? 1 : 0);
  w.u64(c.head_dim);
  w.u64(c.max_input_length);
  w.u64(c.seed);
}

EncoderConfig read_config(ByteReader& r) {
  EncoderConfig c;
  c.vocab_size = r.u64();
  c.embed_dim = r.u64();
  c.use_attention = r.u8() != 0;
  c.use_projection_head = r.u8() != 0;
  c.head_dim = r.u64();
  c.max_input_length = r.u64();
  c.seed = r.u64();
  return c;
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kReservedCount)) {
    throw InputError("vocab_size must exceed the reserved ids");
  }
  if (embed_dim < 2) throw InputError("embed_dim must be >= 2");
  if (use_projection_head && head_dim < 2) throw InputError("head_dim must be >= 2");
  if (max_input_length < 1) throw InputError("max_input_length must be >= 1");
}

std::vector<EncoderTensors::Named> EncoderTensors::tensors() {
  return {{"embedding", &embedding}, {"attention.query", &query},
          {"attention.key", &key},   {"attention.value", &value},
          {"head.weight", &head_weight}, {"head.bias", &head_bias}};
}

std::vector<EncoderTensors::ConstNamed> EncoderTensors::tensors() const {
  return {{"embedding", &embedding}, {"attention.query", &query},
          {"attention.key", &key},   {"attention.value", &value},
          {"head.weight", &head_weight}, {"head.bias", &head_bias}};
}

EncoderGradients EncoderGradients::zeros_like(const EncoderParams& params) {
  EncoderGradients g;
  auto dst = g.tensors();
  auto src = params.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i].tensor->setZero(src[i].tensor->rows(), src[i].tensor->cols());
  }
  return g;
}

bool EncoderGradients::all_zero() const {
  for (const auto& t : tensors()) {
    if (t.tensor->size() != 0 && !t.tensor->isZero(0.0)) return false;
  }
  return true;
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  if (!(a.config == b.config)) return false;
  auto ta = a.tensors();
  auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const auto& x = *ta[i].tensor;
    const auto& y = *tb[i].tensor;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (x.size() != 0 && !(x.array() == y.array()).all()) return false;
  }
  return true;
}

EncoderParams init_params(const EncoderConfig& config) {
  config.validate();
  EncoderParams p;
  p.config = config;
  Rng rng(config.seed);
  const auto vocab = static_cast<Eigen::Index>(config.vocab_size);
  const auto dim = static_cast<Eigen::Index>(config.embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));

  p.embedding.resize(vocab, dim);
  fill_uniform(p.embedding, bound, rng);
  p.embedding.row(kPadId).setZero();

  if (config.use_attention) {
    for (auto* m : {&p.query, &p.key, &p.value}) {
      m->resize(dim, dim);
      fill_uniform(*m, bound, rng);
    }
  }
  if (config.use_projection_head) {
    const auto head = static_cast<Eigen::Index>(config.head_dim);
    p.head_weight.resize(dim, head);
    fill_uniform(p.head_weight, bound, rng);
    p.head_bias.setZero(1, head);
  }
  return p;
}

Embedding encode(const EncoderParams& params, std::span<const TokenId> tokens, Stage stage) {
  EncoderTape::Entry e;
  e.ids = strip_padding(params, tokens);
  return forward(params, stage, e);
}

std::vector<Embedding> encode_batch(const EncoderParams& params,
                                    const std::vector<std::vector<TokenId>>& batch,
                                    Stage stage) {
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      out.push_back(encode(params, batch[i], stage));
    } catch (const InputError& err) {
      throw InputError("batch element " + std::to_string(i) + ": " + err.what());
    }
  }
  return out;
}

std::vector<Embedding> encode_batch_recorded(const EncoderParams& params,
                                             const std::vector<std::vector<TokenId>>& batch,
                                             EncoderTape& tape) {
  tape.entries_.clear();
  tape.entries_.resize(batch.size());
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& e = tape.entries_[i];
    try {
      e.ids = strip_padding(params, batch[i]);
    } catch (const InputError& err) {
      throw InputError("batch element " + std::to_string(i) + ": " + err.what());
    }
    out.push_back(forward(params, Stage::kTraining, e));
  }
  return out;
}

EncoderGradients backward(const EncoderParams& params, const EncoderTape& tape,
                          const std::vector<Eigen::VectorXd>& upstream) {
  if (upstream.size() != tape.size()) {
    throw InputError("upstream has " + std::to_string(upstream.size()) +
                     " gradients for a batch of " + std::to_string(tape.size()));
  }
  auto grads = EncoderGradients::zeros_like(params);
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (upstream[i].size() != tape[i].z.size()) {
      throw InputError("upstream gradient " + std::to_string(i) + " has dimension " +
                       std::to_string(upstream[i].size()) + ", expected " +
                       std::to_string(tape[i].z.size()));
    }
    accumulate(params, tape[i], upstream[i], grads);
  }
  grads.embedding.row(kPadId).setZero();
  return grads;
}

EncoderGradients backward(const EncoderParams& params,
                          const std::vector<std::vector<TokenId>>& batch,
                          const std::vector<Eigen::VectorXd>& upstream) {
  EncoderTape tape;
  encode_batch_recorded(params, batch, tape);
  return backward(params, tape, upstream);
}

std::string serialize_checkpoint(const EncoderParams& params) {
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  write_config(w, params.config);
  const auto tensors = params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    const auto& m = *t.tensor;
    w.u64(static_cast<std::uint64_t>(m.rows()));
    w.u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
    }
  }
  return w.data();
}

EncoderParams deserialize_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (bytes.size() < kCheckpointMagic.size() ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw MismatchError("not a checkpoint");
  }
  r.bytes(kCheckpointMagic.size());
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw MismatchError("unsupported checkpoint version " + std::to_string(version) +
                        " (reader supports " + std::to_string(kCheckpointVersion) + ")");
  }
  EncoderParams p;
  p.config = read_config(r);
  try {
    p.config.validate();
  } catch (const InputError& e) {
    throw MismatchError(std::string("checkpoint config invalid: ") + e.what());
  }
  auto tensors = p.tensors();
  const auto count = r.u32();
  if (count != tensors.size()) {
    throw MismatchError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                        std::to_string(tensors.size()));
  }
  for (auto& t : tensors) {
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (rows != 0 && cols > (bytes.size() / 8) / rows) {
      throw MismatchError("checkpoint is truncated");
    }
    t.tensor->resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < t.tensor->rows(); ++i) {
      for (Eigen::Index j = 0; j < t.tensor->cols(); ++j) (*t.tensor)(i, j) = r.f64();
    }
  }
  if (!r.done()) throw MismatchError("trailing bytes after checkpoint tensors");

  const auto vocab = static_cast<Eigen::Index>(p.config.vocab_size);
  const auto dim = static_cast<Eigen::Index>(p.config.embed_dim);
  bool ok = p.embedding.rows() == vocab && p.embedding.cols() == dim;
  ok = ok && p.has_attention() == p.config.use_attention;
  ok = ok && p.has_head() == p.config.use_projection_head;
  if (ok && p.has_attention()) {
    for (auto* m : {&p.query, &p.key, &p.value}) ok = ok && m->rows() == dim && m->cols() == dim;
  }
  if (ok && p.has_head()) {
    const auto head = static_cast<Eigen::Index>(p.config.head_dim);
    ok = p.head_weight.rows() == dim && p.head_weight.cols() == head &&
         p.head_bias.rows() == 1 && p.head_bias.cols() == head;
  }
  if (!ok) throw MismatchError("checkpoint tensor shapes do not match its config");
  return p;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InputError("checkpoint not found: " + path.string());
  }
  return deserialize_checkpoint(read_file(path));
}

}  // namespace simclf
