#include "simclf/contrastive.hpp"

#include <cmath>
#include <string>

#include "simclf/errors.hpp"

namespace simclf {
namespace {

void check_batch(Eigen::Index n, double tau) {
  if (!(tau > 0.0)) throw InputError("temperature must be positive, got " + std::to_string(tau));
  if (n < 2 || n % 2 != 0) {
    throw InputError("batch must hold an even number (>= 2) of embeddings, got " +
                     std::to_string(n));
  }
}

Eigen::MatrixXd stack(const std::vector<Embedding>& embeddings) {
  if (embeddings.empty()) return {};
  const auto dim = embeddings.front().size();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) throw InputError("embeddings differ in dimension");
    z.row(static_cast<Eigen::Index>(i)) = embeddings[i].transpose();
  }
  return z;
}

// log sum_{k != a} exp(S(a,k)/tau), max-shifted.
double anchor_log_partition(const SimMatrix& sims, Eigen::Index a, double tau) {
  double mx = -INFINITY;
  for (Eigen::Index k = 0; k < sims.cols(); ++k) {
    if (k != a) mx = std::max(mx, sims(a, k) / tau);
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < sims.cols(); ++k) {
    if (k != a) sum += std::exp(sims(a, k) / tau - mx);
  }
  return mx + std::log(sum);
}

}  // namespace

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("cosine_sim on vectors of different dimension");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine_sim of a zero vector");
  return a.dot(b) / (na * nb);
}

double instance_prob(std::size_t i, const Eigen::VectorXd& z,
                     const std::vector<Embedding>& batch, double tau) {
  if (!(tau > 0.0)) throw InputError("temperature must be positive, got " + std::to_string(tau));
  if (i >= batch.size()) {
    throw InputError("instance index " + std::to_string(i) + " outside batch of " +
                     std::to_string(batch.size()));
  }
  Eigen::VectorXd logits(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    logits(static_cast<Eigen::Index>(j)) = cosine_sim(batch[j], z) / tau;
  }
  const double mx = logits.maxCoeff();
  const Eigen::ArrayXd w = (logits.array() - mx).exp();
  return w(static_cast<Eigen::Index>(i)) / w.sum();
}

SimMatrix similarity_matrix(const std::vector<Embedding>& embeddings) {
  const Eigen::MatrixXd z = stack(embeddings);
  return z * z.transpose();
}

double nt_xent_from_similarities(const SimMatrix& sims, double tau) {
  check_batch(sims.rows(), tau);
  if (sims.cols() != sims.rows()) throw InputError("similarity matrix must be square");
  const Eigen::Index n = sims.rows();
  double total = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::Index positive = a ^ 1;
    total += anchor_log_partition(sims, a, tau) - sims(a, positive) / tau;
  }
  // (1/N) sum_i (L_i1 + L_i2) / 2 == sum over all 2N anchors / 2N
  return total / static_cast<double>(n);
}

NtXentResult nt_xent_loss(const std::vector<Embedding>& embeddings, double tau) {
  check_batch(static_cast<Eigen::Index>(embeddings.size()), tau);
  NtXentResult result;
  result.similarities = similarity_matrix(embeddings);
  result.loss = nt_xent_from_similarities(result.similarities, tau);
  return result;
}

Eigen::MatrixXd nt_xent_similarity_grad(const SimMatrix& sims, double tau) {
  check_batch(sims.rows(), tau);
  const Eigen::Index n = sims.rows();
  const double scale = 1.0 / (static_cast<double>(n) * tau);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double log_z = anchor_log_partition(sims, a, tau);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == a) continue;
      grad(a, k) = std::exp(sims(a, k) / tau - log_z) * scale;
    }
    grad(a, a ^ 1) -= scale;
  }
  return grad;
}

std::vector<Eigen::VectorXd> nt_xent_grad(const std::vector<Embedding>& embeddings,
                                          double tau) {
  check_batch(static_cast<Eigen::Index>(embeddings.size()), tau);
  const Eigen::MatrixXd z = stack(embeddings);
  const Eigen::MatrixXd g = nt_xent_similarity_grad(z * z.transpose(), tau);
  // S(a,k) = z_a . z_k contributes to both z_a and z_k.
  const Eigen::MatrixXd dz = (g + g.transpose()) * z;
  std::vector<Eigen::VectorXd> out;
  out.reserve(embeddings.size());
  for (Eigen::Index i = 0; i < dz.rows(); ++i) out.emplace_back(dz.row(i).transpose());
  return out;
}

}  // namespace simclf
