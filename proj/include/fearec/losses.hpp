#pragma once

#include <span>
#include <vector>

#include "fearec/linalg.hpp"

namespace fearec::losses {

struct LossWeights {
  double lambda1 = 0.1;  // contrastive
  double lambda2 = 0.1;  // frequency-domain L1
};

// Categorical NLL of `target` under softmax(logits). Entries at -inf
// (the padding id) drop out of the normalizer.
double rec_loss(std::span<const double> logits, int target);
// Same, plus d(loss)/d(logits) = softmax - onehot.
double rec_loss(std::span<const double> logits, int target, std::vector<double>& grad);

// Symmetric in-batch InfoNCE. views_a[i] and views_b[i] form positive pair
// i; every other view in the batch is a negative. Each anchor's denominator
// runs over all 2B-1 other views. The per-direction terms are summed and
// divided by B. Throws "no negatives" when B < 2.
double contrastive_loss(const Matrix& views_a, const Matrix& views_b, double temperature);
double contrastive_loss(const Matrix& views_a, const Matrix& views_b, double temperature,
                        Matrix* grad_a, Matrix* grad_b);

// sum_k |rfft(a)_k - rfft(b)_k| over the half spectrum of the feature axis.
double freq_reg_loss(std::span<const double> a, std::span<const double> b);
// Gradient w.r.t. a; the gradient w.r.t. b is its negation.
double freq_reg_loss(std::span<const double> a, std::span<const double> b, std::vector<double>& grad_a);

// rec + lambda1 cl + lambda2 freg; throws on non-finite input.
double total_loss(double rec, double cl, double freg, const LossWeights& w);

}  // namespace fearec::losses
