#include "affcorr/acpnet.hpp"

#include <string>

#include "affcorr/errors.hpp"

namespace affcorr {

void AcpConfig::validate() const {
    if (image_input_dim == 0) {
        throw InvalidInput("acp config: image input dimension must be positive");
    }
    if (image_dims.empty() || music_dims.empty() || fusion_dims.empty()) {
        throw InvalidInput("acp config: every stack needs at least one layer");
    }
    for (const auto *dims : {&image_dims, &music_dims, &fusion_dims}) {
        for (std::size_t d : *dims) {
            if (d == 0) {
                throw InvalidInput("acp config: zero-width layer");
            }
        }
    }
    if (image_dims.back() != music_dims.back()) {
        throw InvalidInput("acp config: subnetwork outputs differ (" +
                           std::to_string(image_dims.back()) + " vs " +
                           std::to_string(music_dims.back()) +
                           "); they must share one embedding space");
    }
    if (fusion_dims.back() != 2) {
        throw InvalidInput("acp config: fusion head must end in 2 logits, got " +
                           std::to_string(fusion_dims.back()));
    }
}

double acp_grad_check(AcpModel<double> &model, const AcpBatch<double> &batch,
                      const GradCheckConfig &cfg) {
    AcpModel<double> grads = model.zeros_like();
    AcpTrainScratch<double> ws;
    acp_train_step(model, batch, 0.0, nullptr, grads, ws);

    std::vector<std::vector<double>> analytic;
    for (const auto view : grads.parameter_views()) {
        analytic.emplace_back(view.begin(), view.end());
    }

    return finite_difference_check(
        model.parameter_views(), analytic, [&] { return acp_batch_loss(model, batch); }, cfg);
}

} // namespace affcorr
