#include "drd/staging.hpp"

#include <algorithm>
#include <numeric>

#include "drd/error.hpp"

namespace drd {

FeatureDims feature_dims(const Tensor& feature_map) {
    require(feature_map.rank() == 4, "feature map must be (B,C,H,W), got " + to_string(feature_map.shape()));
    return FeatureDims{feature_map.dim(1), feature_map.dim(2), feature_map.dim(3)};
}

BlockSequence::BlockSequence(std::vector<std::unique_ptr<Module>> blocks, std::unique_ptr<Module> head,
                             std::vector<std::size_t> natural_stage_ends)
    : blocks_(std::move(blocks)), head_(std::move(head)), natural_stage_ends_(std::move(natural_stage_ends)) {
    require(!blocks_.empty(), "BlockSequence needs at least one block");
}

const Module& BlockSequence::block(std::size_t index) const {
    require(index < blocks_.size(), "block index " + std::to_string(index) + " out of range");
    return *blocks_[index];
}

const Module& BlockSequence::head() const {
    require(head_ != nullptr, "model has no head");
    return *head_;
}

Tensor BlockSequence::run(const Tensor& x, std::size_t first, std::size_t last) const {
    require(first <= last && last < blocks_.size(), "block range out of bounds");
    Tensor h = x;
    for (std::size_t i = first; i <= last; ++i) {
        h = blocks_[i]->forward(h);
    }
    return h;
}

Tensor BlockSequence::run_from(const Tensor& x, std::size_t first) const {
    require(first <= blocks_.size(), "block index out of range");
    Tensor h = x;
    for (std::size_t i = first; i < blocks_.size(); ++i) {
        h = blocks_[i]->forward(h);
    }
    return h;
}

Tensor BlockSequence::forward(const Tensor& x) const {
    Tensor h = run(x, 0, blocks_.size() - 1);
    return head_ ? head_->forward(h) : h;
}

std::vector<Tensor> BlockSequence::parameters() const {
    std::vector<Tensor> params;
    for (const auto& b : blocks_) {
        auto p = b->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    if (head_) {
        auto p = head_->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    return params;
}

std::vector<Tensor> BlockSequence::block_parameters(std::size_t index) const { return block(index).parameters(); }

std::size_t BlockSequence::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : parameters()) {
        total += p.numel();
    }
    return total;
}

PairingStrategy parse_pairing(std::string_view name) {
    if (name == "identity") {
        return PairingStrategy::identity;
    }
    if (name == "reverse") {
        return PairingStrategy::reverse;
    }
    if (name == "shift_right") {
        return PairingStrategy::shift_right;
    }
    fail(ErrorKind::invalid_argument, "unknown pairing strategy '" + std::string(name) + "'");
}

std::string_view to_string(PairingStrategy strategy) {
    switch (strategy) {
        case PairingStrategy::identity:
            return "identity";
        case PairingStrategy::reverse:
            return "reverse";
        case PairingStrategy::shift_right:
            return "shift_right";
    }
    return "identity";
}

std::size_t StagePlan::stage_start(std::size_t stage) const {
    require(stage < n_stages, "stage index out of range");
    return stage == 0 ? 0 : boundaries[stage - 1] + 1;
}

void validate(const StagePlan& plan, std::size_t block_count) {
    require(plan.n_stages >= 1, "plan needs at least one stage");
    require(plan.n_stages <= block_count, "n_stages " + std::to_string(plan.n_stages) + " exceeds block count " +
                                              std::to_string(block_count));
    require(plan.boundaries.size() == plan.n_stages, "plan needs exactly one boundary per stage");
    for (std::size_t i = 0; i < plan.boundaries.size(); ++i) {
        require(plan.boundaries[i] < block_count, "boundary " + std::to_string(plan.boundaries[i]) + " out of range");
        require(i == 0 || plan.boundaries[i] > plan.boundaries[i - 1], "boundaries must be strictly increasing");
    }
    require(plan.boundaries.back() == block_count - 1, "last boundary must be the last block (" +
                                                           std::to_string(block_count - 1) + ")");
    require(plan.pairing.size() == plan.n_stages, "pairing length must equal n_stages");
    std::vector<std::size_t> sorted = plan.pairing;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        require(sorted[i] == i, "pairing must be a permutation of stage slots");
    }
}

StagePlan partition(std::size_t block_count, std::size_t n_stages,
                    const std::optional<std::vector<std::size_t>>& boundaries) {
    require(n_stages >= 1, "n_stages must be at least 1");
    require(n_stages <= block_count, "n_stages " + std::to_string(n_stages) + " exceeds block count " +
                                         std::to_string(block_count));
    StagePlan plan;
    plan.n_stages = n_stages;
    if (boundaries) {
        plan.boundaries = *boundaries;
    } else {
        for (std::size_t k = 1; k <= n_stages; ++k) {
            plan.boundaries.push_back((k * block_count + n_stages - 1) / n_stages - 1);
        }
    }
    plan.pairing = make_pairing(n_stages, PairingStrategy::identity);
    validate(plan, block_count);
    return plan;
}

StagePlan partition(const BlockSequence& model, std::size_t n_stages,
                    const std::optional<std::vector<std::size_t>>& boundaries) {
    if (!boundaries && model.natural_stage_ends().size() == n_stages) {
        return drd::partition(model.size(), n_stages, std::optional<std::vector<std::size_t>>(model.natural_stage_ends()));
    }
    return partition(model.size(), n_stages, boundaries);
}

std::vector<std::size_t> make_pairing(std::size_t n_stages, PairingStrategy strategy) {
    require(n_stages >= 1, "make_pairing: n_stages must be at least 1");
    std::vector<std::size_t> pairing(n_stages);
    for (std::size_t i = 0; i < n_stages; ++i) {
        switch (strategy) {
            case PairingStrategy::identity:
                pairing[i] = i;
                break;
            case PairingStrategy::reverse:
                pairing[i] = n_stages - 1 - i;
                break;
            case PairingStrategy::shift_right:
                pairing[i] = (i + 1) % n_stages;
                break;
        }
    }
    return pairing;
}

std::vector<std::size_t> make_pairing(std::size_t n_stages, std::string_view strategy) {
    return make_pairing(n_stages, parse_pairing(strategy));
}

StagePlan with_pairing(StagePlan plan, std::vector<std::size_t> pairing) {
    plan.pairing = std::move(pairing);
    require(plan.pairing.size() == plan.n_stages, "pairing length must equal n_stages");
    std::vector<std::size_t> sorted = plan.pairing;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        require(sorted[i] == i, "pairing must be a permutation of stage slots");
    }
    return plan;
}

std::vector<Tensor> stage_outputs(const BlockSequence& model, const StagePlan& plan, const Tensor& input) {
    validate(plan, model.size());
    std::vector<Tensor> outputs;
    outputs.reserve(plan.n_stages);
    Tensor h = input;
    std::size_t next = 0;
    for (std::size_t boundary : plan.boundaries) {
        h = model.run(h, next, boundary);
        outputs.push_back(h);
        next = boundary + 1;
    }
    return outputs;
}

std::vector<FeatureDims> stage_dims(const BlockSequence& model, const StagePlan& plan, const FeatureDims& input) {
    NoGradGuard no_grad;
    Tensor probe(Shape{1, input.channels, input.height, input.width}, 0.0);
    std::vector<FeatureDims> dims;
    for (const auto& f : stage_outputs(model, plan, probe)) {
        dims.push_back(feature_dims(f));
    }
    return dims;
}

}  // namespace drd
