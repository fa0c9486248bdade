#include "drd/models.hpp"

#include <cmath>

#include "drd/error.hpp"
#include "drd/ops.hpp"

namespace drd {

namespace {

class ConvStageBlock : public Module {
public:
    ConvStageBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng)
        : down_(in, out, 3, stride, 1, rng), refine_(out, out, 3, 1, 1, rng) {}

    Tensor forward(const Tensor& x) const override {
        return ops::relu(ops::normalize_per_sample(refine_(ops::relu(ops::normalize_per_sample(down_(x))))));
    }

    std::vector<Tensor> parameters() const override {
        std::vector<Tensor> p;
        down_.collect(p);
        refine_.collect(p);
        return p;
    }

private:
    Conv2d down_;
    Conv2d refine_;
};

// x + W_b relu(W_a x), 3x3 token mixing then 1x1 channel mixing.
class ResidualBlock : public Module {
public:
    ResidualBlock(std::size_t width, double branch_gain, Rng& rng)
        : mix_(width, width, 3, 1, 1, rng), project_(width, width, 1, 1, 0, rng, branch_gain) {}

    Tensor forward(const Tensor& x) const override { return ops::add(x, project_(ops::relu(mix_(x)))); }

    std::vector<Tensor> parameters() const override {
        std::vector<Tensor> p;
        mix_.collect(p);
        project_.collect(p);
        return p;
    }

private:
    Conv2d mix_;
    Conv2d project_;
};

class PatchStemBlock : public Module {
public:
    PatchStemBlock(std::size_t in, std::size_t width, std::size_t patch, double branch_gain, Rng& rng)
        : embed_(in, width, patch, patch, 0, rng), body_(width, branch_gain, rng) {}

    Tensor forward(const Tensor& x) const override { return body_.forward(embed_(x)); }

    std::vector<Tensor> parameters() const override {
        std::vector<Tensor> p;
        embed_.collect(p);
        auto rest = body_.parameters();
        p.insert(p.end(), rest.begin(), rest.end());
        return p;
    }

private:
    Conv2d embed_;
    ResidualBlock body_;
};

class ClassifierHead : public Module {
public:
    ClassifierHead(std::size_t channels, std::size_t classes, Rng& rng) : fc_(channels, classes, rng) {}

    Tensor forward(const Tensor& x) const override { return fc_(ops::global_avg_pool(x)); }

    std::vector<Tensor> parameters() const override {
        std::vector<Tensor> p;
        fc_.collect(p);
        return p;
    }

private:
    Linear fc_;
};

class MaskHead : public Module {
public:
    MaskHead(std::size_t channels, std::size_t outputs, std::size_t image_size, Rng& rng)
        : refine_(channels, channels, 3, 1, 1, rng), classify_(channels, outputs, 1, 1, 0, rng), size_(image_size) {}

    Tensor forward(const Tensor& x) const override {
        return ops::resize_bilinear(classify_(ops::relu(ops::normalize_per_sample(refine_(x)))), size_, size_);
    }

    std::vector<Tensor> parameters() const override {
        std::vector<Tensor> p;
        refine_.collect(p);
        classify_.collect(p);
        return p;
    }

private:
    Conv2d refine_;
    Conv2d classify_;
    std::size_t size_;
};

}  // namespace

Family parse_family(std::string_view name) {
    if (name == "conv_hierarchical") {
        return Family::conv_hierarchical;
    }
    if (name == "patch_flat") {
        return Family::patch_flat;
    }
    fail(ErrorKind::invalid_argument, "unknown model family '" + std::string(name) + "'");
}

std::string_view to_string(Family family) {
    return family == Family::patch_flat ? "patch_flat" : "conv_hierarchical";
}

HeadKind parse_head(std::string_view name) {
    if (name == "classifier") {
        return HeadKind::classifier;
    }
    if (name == "dense_mask") {
        return HeadKind::dense_mask;
    }
    fail(ErrorKind::invalid_argument, "unknown head kind '" + std::string(name) + "'");
}

std::string_view to_string(HeadKind head) { return head == HeadKind::dense_mask ? "dense_mask" : "classifier"; }

void validate(const ModelSpec& spec) {
    require(spec.depth >= 1, "model depth must be at least 1");
    require(spec.width >= 1 && spec.outputs >= 1 && spec.in_channels >= 1, "model sizes must be positive");
    require(spec.image_size >= 1, "image size must be positive");
    if (spec.family == Family::patch_flat) {
        require(spec.patch >= 1 && spec.image_size % spec.patch == 0, "patch size must divide the image size");
    } else {
        require(spec.strides.empty() || spec.strides.size() == spec.depth, "strides must list one entry per block");
        std::size_t size = spec.image_size;
        for (std::size_t k = 0; k < spec.depth; ++k) {
            const std::size_t s = spec.strides.empty() ? 2 : spec.strides[k];
            require(s == 1 || s == 2, "block strides must be 1 or 2");
            size = (size + 2 - 3) / s + 1;
            require(size >= 1, "model downsamples below one pixel");
        }
    }
}

std::size_t hierarchical_width(const ModelSpec& spec, std::size_t block) {
    return spec.width * (std::size_t{1} << std::min<std::size_t>(block, 2));
}

std::unique_ptr<Module> build_head(const ModelSpec& spec, std::size_t channels, Rng& rng) {
    if (spec.head == HeadKind::classifier) {
        return std::make_unique<ClassifierHead>(channels, spec.outputs, rng);
    }
    return std::make_unique<MaskHead>(channels, spec.outputs, spec.image_size, rng);
}

BlockSequence build_model(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    std::vector<std::unique_ptr<Module>> blocks;
    std::vector<std::size_t> natural;
    std::size_t channels = 0;
    if (spec.family == Family::conv_hierarchical) {
        std::size_t in = spec.in_channels;
        for (std::size_t k = 0; k < spec.depth; ++k) {
            const std::size_t out = hierarchical_width(spec, k);
            const std::size_t stride = spec.strides.empty() ? 2 : spec.strides[k];
            blocks.push_back(std::make_unique<ConvStageBlock>(in, out, stride, rng));
            natural.push_back(k);
            in = out;
        }
        channels = in;
    } else {
        const double gain = 1.0 / std::sqrt(static_cast<double>(spec.depth));
        blocks.push_back(std::make_unique<PatchStemBlock>(spec.in_channels, spec.width, spec.patch, gain, rng));
        for (std::size_t k = 1; k < spec.depth; ++k) {
            blocks.push_back(std::make_unique<ResidualBlock>(spec.width, gain, rng));
        }
        channels = spec.width;
    }
    auto head = build_head(spec, channels, rng);
    return BlockSequence(std::move(blocks), std::move(head), std::move(natural));
}

}  // namespace drd
