#include "sepvae/mi.hpp"

#include <numeric>

namespace sepvae {

JointBatch shuffle_salient(const JointBatch& joint, uint64_t seed) {
    SEPVAE_CHECK(joint.size() >= 2, "batch size must be >= 2 to shuffle");
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    auto perm = torch::randperm(joint.size(), gen, torch::kInt64);
    JointBatch shuffled;
    shuffled.common = joint.common;
    shuffled.salient = joint.salient.index_select(0, perm);
    shuffled.provenance = BatchProvenance::shuffled;
    return shuffled;
}

double discriminator_step(const JointBatch& joint, const JointBatch& shuffled,
                          SepVaeModel& model, torch::optim::Optimizer& disc_optimizer) {
    SEPVAE_CHECK(joint.size() == shuffled.size(), "batch size mismatch");

    auto d_joint = model.discriminate_joint(joint.common.detach(), joint.salient.detach());
    auto d_shuffled = model.discriminate_joint(shuffled.common.detach(),
                                               shuffled.salient.detach());
    auto bce = (-torch::log(d_joint) - torch::log(1.0 - d_shuffled)).mean();

    disc_optimizer.zero_grad();
    bce.backward();
    disc_optimizer.step();
    return bce.item<double>();
}

torch::Tensor mi_penalty(const JointBatch& joint, SepVaeModel& model) {
    // D's parameters must not collect gradient here (Alg. phase separation).
    std::vector<torch::Tensor> disc_params = model.discriminator_parameters();
    std::vector<bool> prev;
    prev.reserve(disc_params.size());
    for (auto& p : disc_params) {
        prev.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }
    auto d = model.discriminate_joint(joint.common, joint.salient);
    auto penalty = torch::relu(torch::log(d / (1.0 - d))).mean();
    for (size_t i = 0; i < disc_params.size(); ++i) {
        disc_params[i].set_requires_grad(prev[i]);
    }
    return penalty;
}

}  // namespace sepvae
