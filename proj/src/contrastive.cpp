/*
 * Copyright 2026 The reident Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "reident/contrastive.hpp"

#include <cmath>
#include <string>

#include "reident/error.hpp"

namespace reident {

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw PreconditionError("temperature must be a positive finite number");
  }
}

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw PreconditionError("cosine similarity of vectors with different dimensions");
  }
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) {
    throw PreconditionError("cosine similarity is undefined for a zero vector");
  }
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

namespace {

struct Normalized {
  RowMatrix unit;
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const RowMatrix& m, const char* name) {
  Normalized out{m, m.rowwise().norm()};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!(out.norms(i) > 0.0) || !std::isfinite(out.norms(i))) {
      throw PreconditionError(std::string(name) + " row " + std::to_string(i) +
                              " is zero or not finite");
    }
    out.unit.row(i) /= out.norms(i);
  }
  return out;
}

void check_pair(const RowMatrix& z, const RowMatrix& zhat) {
  if (z.rows() != zhat.rows() || z.cols() != zhat.cols()) {
    throw PreconditionError("anchor and positive batches differ in shape");
  }
}

// One direction of the loss with anchors a and positives b (both unit rows).
// Accumulates d(loss)/d(a) and d(loss)/d(b) scaled by `weight`.
double directional_loss(const RowMatrix& a, const RowMatrix& b, double tau,
                        double weight, RowMatrix* grad_a, RowMatrix* grad_b,
                        std::vector<double>* per_anchor) {
  const Eigen::Index k_count = a.rows();
  const RowMatrix saa = (a * a.transpose()) / tau;
  const RowMatrix sab = (a * b.transpose()) / tau;
  double total = 0.0;
  // Softmax weights over the 2K-1 denominator terms for each anchor.
  RowMatrix paa = RowMatrix::Zero(k_count, k_count);
  RowMatrix pab(k_count, k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    double row_max = sab.row(k).maxCoeff();
    for (Eigen::Index j = 0; j < k_count; ++j) {
      if (j != k) row_max = std::max(row_max, saa(k, j));
    }
    double negatives = 0.0;
    for (Eigen::Index j = 0; j < k_count; ++j) {
      if (j != k) {
        paa(k, j) = std::exp(saa(k, j) - row_max);
        negatives += paa(k, j);
      }
      pab(k, j) = std::exp(sab(k, j) - row_max);
      if (j != k) negatives += pab(k, j);
    }
    const double denom = negatives + pab(k, k);
    // When the positive is the largest term, log1p keeps the digits of a
    // loss far below one; otherwise the loss is at least log 2.
    const double loss_k = sab(k, k) == row_max ? std::log1p(negatives)
                                               : std::log(denom) + row_max - sab(k, k);
    if (per_anchor) per_anchor->push_back(loss_k);
    total += loss_k;
    paa.row(k) /= denom;
    pab.row(k) /= denom;
    pab(k, k) -= 1.0;
  }
  const double mean = total / static_cast<double>(k_count);
  if (grad_a) {
    const double scale = weight / (tau * static_cast<double>(k_count));
    // d/da_k of a_k.a_j appears for both k and j in the self-similarity block.
    *grad_a += scale * ((paa + paa.transpose()) * a + pab * b);
    *grad_b += scale * (pab.transpose() * a);
  }
  return mean;
}

// Pulls a gradient with respect to unit rows back to the raw rows.
RowMatrix unnormalize_gradient(const RowMatrix& grad_unit, const Normalized& n) {
  RowMatrix out(grad_unit.rows(), grad_unit.cols());
  for (Eigen::Index i = 0; i < grad_unit.rows(); ++i) {
    const double radial = grad_unit.row(i).dot(n.unit.row(i));
    out.row(i) = (grad_unit.row(i) - radial * n.unit.row(i)) / n.norms(i);
  }
  return out;
}

}  // namespace

SimilarityMatrices similarity_matrices(const RowMatrix& z, const RowMatrix& zhat) {
  check_pair(z, zhat);
  const Normalized a = normalize_rows(z, "z");
  const Normalized b = normalize_rows(zhat, "zhat");
  SimilarityMatrices out{a.unit * a.unit.transpose(), a.unit * b.unit.transpose()};
  out.zz.diagonal().setOnes();
  return out;
}

std::vector<double> nt_xent_anchor_losses(const RowMatrix& z,
                                          const RowMatrix& zhat,
                                          Temperature tau) {
  check_pair(z, zhat);
  if (z.rows() < 2) throw PreconditionError("NT-Xent needs a batch of at least 2");
  const Normalized a = normalize_rows(z, "z");
  const Normalized b = normalize_rows(zhat, "zhat");
  std::vector<double> out;
  directional_loss(a.unit, b.unit, tau.value(), 1.0, nullptr, nullptr, &out);
  return out;
}

double nt_xent_loss(const RowMatrix& z, const RowMatrix& zhat, Temperature tau,
                    bool symmetric) {
  check_pair(z, zhat);
  if (z.rows() < 2) throw PreconditionError("NT-Xent needs a batch of at least 2");
  const Normalized a = normalize_rows(z, "z");
  const Normalized b = normalize_rows(zhat, "zhat");
  const double forward =
      directional_loss(a.unit, b.unit, tau.value(), 1.0, nullptr, nullptr, nullptr);
  if (!symmetric) return forward;
  const double mirrored =
      directional_loss(b.unit, a.unit, tau.value(), 1.0, nullptr, nullptr, nullptr);
  return 0.5 * (forward + mirrored);
}

LossAndGradient nt_xent_loss_and_gradient(const RowMatrix& z,
                                          const RowMatrix& zhat,
                                          Temperature tau, bool symmetric) {
  check_pair(z, zhat);
  if (z.rows() < 2) throw PreconditionError("NT-Xent needs a batch of at least 2");
  const Normalized a = normalize_rows(z, "z");
  const Normalized b = normalize_rows(zhat, "zhat");
  RowMatrix ga = RowMatrix::Zero(z.rows(), z.cols());
  RowMatrix gb = RowMatrix::Zero(z.rows(), z.cols());
  const double w = symmetric ? 0.5 : 1.0;
  double loss = w * directional_loss(a.unit, b.unit, tau.value(), w, &ga, &gb, nullptr);
  if (symmetric) {
    loss += w * directional_loss(b.unit, a.unit, tau.value(), w, &gb, &ga, nullptr);
  }
  return LossAndGradient{loss, unnormalize_gradient(ga, a),
                         unnormalize_gradient(gb, b)};
}

}  // namespace reident
