#ifndef SEPVAE_MI_HPP
#define SEPVAE_MI_HPP

#include <cstdint>

#include <torch/torch.h>

#include "sepvae/model.hpp"

namespace sepvae {

enum class BatchProvenance { joint, shuffled };

/// A batch of (c, s) code pairs, either drawn jointly from q(c, s) or with
/// the s column permuted to emulate q(c) q(s).
struct JointBatch {
    torch::Tensor common;   // (B, D_c)
    torch::Tensor salient;  // (B, D_s)
    BatchProvenance provenance = BatchProvenance::joint;

    int64_t size() const { return common.size(0); }
};

/// Permutes the salient rows by a uniformly random permutation, leaving the
/// common rows untouched. Requires B >= 2.
JointBatch shuffle_salient(const JointBatch& joint, uint64_t seed);

/// One discriminator update: BCE with joint pairs labeled 1 and shuffled
/// pairs labeled 0 (per pair, the sum of both terms, averaged over pairs).
/// Codes are detached, so only the discriminator's parameters move.
double discriminator_step(const JointBatch& joint, const JointBatch& shuffled,
                          SepVaeModel& model, torch::optim::Optimizer& disc_optimizer);

/// Batch-averaged ReLU(logit(D([c, s]))). The discriminator is evaluated
/// with its parameters frozen; gradient flows to the encoders only.
torch::Tensor mi_penalty(const JointBatch& joint, SepVaeModel& model);

}  // namespace sepvae

#endif
