#pragma once

// Deterministic synthetic tasks: a broad pretraining distribution over all
// shape classes and a narrow downstream task over a class subset rendered
// with a style shift (extra rotation and a palette change).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drd/tensor.hpp"

namespace drd {

enum class TaskKind { classification, segmentation };

TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind kind);

inline constexpr std::size_t kShapeCount = 8;

struct SyntheticTaskSpec {
    TaskKind kind = TaskKind::classification;
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t n_classes = 3;
    std::size_t pretrain_classes = kShapeCount;
    // Downstream class k is pretraining class downstream_classes[k]; empty
    // selects the default subset.
    std::vector<int> downstream_classes;
    double style_shift = 0.5;
    double noise = 0.08;
    std::size_t n_train = 60;
    std::size_t n_test = 300;
    std::size_t n_pretrain = 3200;
    std::size_t n_pretrain_test = 400;
    std::uint64_t seed = 7;

    bool operator==(const SyntheticTaskSpec&) const = default;
};

void validate(const SyntheticTaskSpec& spec);
std::vector<int> resolved_downstream_classes(const SyntheticTaskSpec& spec);

// Placement of the main object; everything needed to re-rasterise the mask.
struct ObjectParams {
    int shape = 0;
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;
    double angle = 0.0;

    bool operator==(const ObjectParams&) const = default;
};

// Membership in object-local coordinates (unit radius, unrotated).
bool shape_contains(int shape, double u, double v);

// Pixel (x, y) is inside when its centre (x + 0.5, y + 0.5) is.
std::vector<std::uint8_t> rasterize(const ObjectParams& object, std::size_t height, std::size_t width);

struct RenderedSample {
    std::vector<double> image;  // (C, H, W) in [0, 1]
    ObjectParams object;
};

// One image of `shape`; every random draw comes from `sample_seed`, and
// style_shift = 0 reproduces the pretraining rendering exactly.
RenderedSample render_sample(int shape, std::uint64_t sample_seed, double style_shift, std::size_t image_size,
                             std::size_t channels, double noise);

enum class Split { pretrain_train = 0, pretrain_test = 1, train = 2, test = 3 };

std::uint64_t sample_seed(std::uint64_t task_seed, Split split, std::size_t index);

struct Dataset {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> images;   // (N, C, H, W)
    std::vector<int> labels;      // class id in this dataset's label space
    std::vector<std::uint8_t> masks;  // (N, H, W), segmentation only
    std::vector<ObjectParams> objects;

    std::size_t size() const { return labels.size(); }
    std::size_t image_stride() const { return channels * height * width; }
    bool operator==(const Dataset&) const = default;
};

struct TaskData {
    Dataset pretrain_train;
    Dataset pretrain_test;
    Dataset train;
    Dataset test;
    // Downstream class k -> pretraining class label_map[k].
    std::vector<int> label_map;
};

TaskData generate_task(const SyntheticTaskSpec& spec);

Tensor batch_images(const Dataset& data, std::span<const std::size_t> indices);
std::vector<int> batch_labels(const Dataset& data, std::span<const std::size_t> indices);
// (B, H, W) of 0/1 doubles.
Tensor batch_masks(const Dataset& data, std::span<const std::size_t> indices);

// Hex SHA-256 of a dataset's canonical byte serialisation.
std::string dataset_hash(const Dataset& data);

// Directory layout: manifest.json plus one <split>.bin per split.
void save_task(const TaskData& data, const SyntheticTaskSpec& spec, const std::filesystem::path& dir);
TaskData load_task(const std::filesystem::path& dir);

}  // namespace drd
