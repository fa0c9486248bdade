#include "drd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "drd/error.hpp"
#include "drd/hashing.hpp"
#include "drd/nn.hpp"
#include "drd/serialization.hpp"

namespace drd {

namespace {

constexpr char kSplitMagic[8] = {'D', 'R', 'D', 'S', 'P', 'L', 'I', 'T'};
constexpr std::uint32_t kSplitVersion = 1;
constexpr int kManifestVersion = 1;

constexpr std::array<const char*, 4> kSplitNames{"pretrain_train", "pretrain_test", "train", "test"};

struct Rgb {
    double c[3];
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Palette change: partial cyclic rotation of the colour channels. Keeps
// brightness contrast between object and background.
void shift_palette(Rgb& color, double amount) {
    const Rgb original = color;
    for (int ch = 0; ch < 3; ++ch) {
        color.c[ch] = (1.0 - amount) * original.c[ch] + amount * original.c[(ch + 1) % 3];
    }
}

bool inside(const ObjectParams& o, double px, double py) {
    const double dx = px - o.cx, dy = py - o.cy;
    const double cs = std::cos(o.angle), sn = std::sin(o.angle);
    const double u = (dx * cs + dy * sn) / o.radius;
    const double v = (-dx * sn + dy * cs) / o.radius;
    return shape_contains(o.shape, u, v);
}

void append_bytes(std::vector<unsigned char>& out, const void* src, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(src);
    out.insert(out.end(), p, p + n);
}

template <class T>
void append_value(std::vector<unsigned char>& out, T value) {
    append_bytes(out, &value, sizeof(T));
}

std::vector<unsigned char> serialize(const Dataset& d) {
    std::vector<unsigned char> out;
    append_bytes(out, kSplitMagic, sizeof(kSplitMagic));
    append_value(out, kSplitVersion);
    append_value<std::uint64_t>(out, d.size());
    append_value<std::uint64_t>(out, d.channels);
    append_value<std::uint64_t>(out, d.height);
    append_value<std::uint64_t>(out, d.width);
    append_bytes(out, d.images.data(), d.images.size() * sizeof(double));
    for (int label : d.labels) {
        append_value<std::int32_t>(out, label);
    }
    append_value<std::uint8_t>(out, d.masks.empty() ? 0 : 1);
    append_bytes(out, d.masks.data(), d.masks.size());
    for (const auto& o : d.objects) {
        append_value<std::int32_t>(out, o.shape);
        append_value(out, o.cx);
        append_value(out, o.cy);
        append_value(out, o.radius);
        append_value(out, o.angle);
    }
    return out;
}

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    void read(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            fail(ErrorKind::io, "dataset split file truncated");
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    template <class T>
    T value() {
        T v{};
        read(&v, sizeof(T));
        return v;
    }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

Dataset deserialize(const std::vector<unsigned char>& bytes) {
    Reader in(bytes);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kSplitMagic, sizeof(magic)) != 0) {
        fail(ErrorKind::io, "not a dataset split file");
    }
    if (in.value<std::uint32_t>() != kSplitVersion) {
        fail(ErrorKind::io, "unsupported dataset split version");
    }
    Dataset d;
    const auto n = in.value<std::uint64_t>();
    d.channels = in.value<std::uint64_t>();
    d.height = in.value<std::uint64_t>();
    d.width = in.value<std::uint64_t>();
    d.images.resize(n * d.image_stride());
    in.read(d.images.data(), d.images.size() * sizeof(double));
    d.labels.resize(n);
    for (auto& label : d.labels) {
        label = in.value<std::int32_t>();
    }
    if (in.value<std::uint8_t>() != 0) {
        d.masks.resize(n * d.height * d.width);
        in.read(d.masks.data(), d.masks.size());
    }
    d.objects.resize(n);
    for (auto& o : d.objects) {
        o.shape = in.value<std::int32_t>();
        o.cx = in.value<double>();
        o.cy = in.value<double>();
        o.radius = in.value<double>();
        o.angle = in.value<double>();
    }
    return d;
}

Dataset make_split(const SyntheticTaskSpec& spec, Split split, std::size_t count, const std::vector<int>& classes,
                   double style) {
    Dataset d;
    d.channels = spec.channels;
    d.height = spec.image_size;
    d.width = spec.image_size;
    d.images.reserve(count * d.image_stride());
    d.labels.reserve(count);
    d.objects.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % classes.size());
        auto sample = render_sample(classes[static_cast<std::size_t>(label)], sample_seed(spec.seed, split, i), style,
                                    spec.image_size, spec.channels, spec.noise);
        d.images.insert(d.images.end(), sample.image.begin(), sample.image.end());
        d.labels.push_back(label);
        if (spec.kind == TaskKind::segmentation) {
            auto mask = rasterize(sample.object, d.height, d.width);
            d.masks.insert(d.masks.end(), mask.begin(), mask.end());
        }
        d.objects.push_back(sample.object);
    }
    return d;
}

}  // namespace

TaskKind parse_task_kind(std::string_view name) {
    if (name == "classification") {
        return TaskKind::classification;
    }
    if (name == "segmentation") {
        return TaskKind::segmentation;
    }
    fail(ErrorKind::invalid_argument, "unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::segmentation ? "segmentation" : "classification";
}

std::vector<int> resolved_downstream_classes(const SyntheticTaskSpec& spec) {
    if (!spec.downstream_classes.empty()) {
        return spec.downstream_classes;
    }
    static constexpr int kDefaultOrder[kShapeCount] = {1, 5, 7, 0, 3, 2, 4, 6};
    std::vector<int> classes;
    for (std::size_t k = 0; k < spec.n_classes && k < kShapeCount; ++k) {
        classes.push_back(kDefaultOrder[k]);
    }
    return classes;
}

void validate(const SyntheticTaskSpec& spec) {
    require(spec.image_size >= 8, "image_size must be at least 8");
    require(spec.channels == 3, "synthetic images have exactly 3 channels");
    require(spec.pretrain_classes >= 1 && spec.pretrain_classes <= kShapeCount,
            "pretrain_classes must be in [1, " + std::to_string(kShapeCount) + "]");
    require(spec.n_classes >= 1, "n_classes must be positive");
    require(spec.n_classes <= spec.pretrain_classes, "n_classes (" + std::to_string(spec.n_classes) +
                                                         ") exceeds pretrain_classes (" +
                                                         std::to_string(spec.pretrain_classes) + ")");
    require(spec.style_shift >= 0.0 && spec.style_shift <= 1.0, "style_shift must lie in [0, 1]");
    require(spec.noise >= 0.0, "noise must be non-negative");
    require(spec.n_train >= 1, "n_train must be at least 1");
    auto classes = resolved_downstream_classes(spec);
    require(classes.size() == spec.n_classes, "downstream_classes must list n_classes entries");
    std::vector<int> sorted = classes;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "downstream_classes repeat a class");
    for (int c : classes) {
        require(c >= 0 && static_cast<std::size_t>(c) < spec.pretrain_classes,
                "downstream class " + std::to_string(c) + " is not a pretraining class");
    }
}

bool shape_contains(int shape, double u, double v) {
    const double au = std::abs(u), av = std::abs(v);
    const double r2 = u * u + v * v;
    switch (shape) {
        case 0:  // disk
            return r2 <= 1.0;
        case 1:  // square
            return std::max(au, av) <= 0.85;
        case 2:  // triangle, apex at v = -0.9
            return v >= -0.9 && v <= 0.75 && au <= (v + 0.9) * 0.6;
        case 3:  // ring
            return r2 <= 1.0 && r2 >= 0.25;
        case 4:  // cross
            return (au <= 0.22 && av <= 1.0) || (av <= 0.22 && au <= 1.0);
        case 5:  // diamond
            return au + av <= 1.0;
        case 6:  // ellipse
            return u * u + 4.0 * v * v <= 1.0;
        case 7:  // square frame
            return std::max(au, av) <= 0.9 && std::max(au, av) >= 0.6;
        default:
            fail(ErrorKind::invalid_argument, "unknown shape id " + std::to_string(shape));
    }
}

std::vector<std::uint8_t> rasterize(const ObjectParams& object, std::size_t height, std::size_t width) {
    std::vector<std::uint8_t> mask(height * width, 0);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            mask[y * width + x] = inside(object, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5) ? 1 : 0;
        }
    }
    return mask;
}

std::uint64_t sample_seed(std::uint64_t task_seed, Split split, std::size_t index) {
    return derive_seed(task_seed, (static_cast<std::uint64_t>(split) + 1) << 40 | index);
}

RenderedSample render_sample(int shape, std::uint64_t seed, double style_shift, std::size_t image_size,
                             std::size_t channels, double noise) {
    require(channels == 3, "render_sample: 3 channels required");
    Rng rng(seed);
    const double s = static_cast<double>(image_size);

    Rgb background{{uniform(rng, 0.15, 0.45), uniform(rng, 0.15, 0.45), uniform(rng, 0.15, 0.45)}};
    const double grad_x = uniform(rng, -0.15, 0.15), grad_y = uniform(rng, -0.15, 0.15);
    Rgb foreground{{uniform(rng, 0.55, 0.95), uniform(rng, 0.55, 0.95), uniform(rng, 0.55, 0.95)}};
    const double stripe_freq = uniform(rng, 0.5, 1.2);
    const double stripe_dir = uniform(rng, 0.0, std::numbers::pi);
    const double stripe_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

    ObjectParams object;
    object.shape = shape;
    object.cx = uniform(rng, 0.35, 0.65) * s;
    object.cy = uniform(rng, 0.35, 0.65) * s;
    object.radius = uniform(rng, 0.24, 0.34) * s;
    object.angle = uniform(rng, -0.3, 0.3) + style_shift * std::numbers::pi / 4.0;

    struct Clutter {
        double x, y, r;
        Rgb color;
    };
    std::vector<Clutter> clutter(3);
    for (auto& c : clutter) {
        c.x = uniform(rng, 0.0, s);
        c.y = uniform(rng, 0.0, s);
        c.r = uniform(rng, 0.03, 0.06) * s;
        c.color = Rgb{{uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9)}};
    }

    if (style_shift > 0.0) {
        shift_palette(background, style_shift);
        shift_palette(foreground, style_shift);
        for (auto& c : clutter) {
            shift_palette(c.color, style_shift);
        }
    }

    RenderedSample out;
    out.object = object;
    out.image.resize(3 * image_size * image_size);
    std::normal_distribution<double> pixel_noise(0.0, 1.0);
    const double cd = std::cos(stripe_dir), sd = std::sin(stripe_dir);
    for (std::size_t y = 0; y < image_size; ++y) {
        for (std::size_t x = 0; x < image_size; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            Rgb color = background;
            const double ramp = grad_x * (px / s - 0.5) + grad_y * (py / s - 0.5);
            for (double& c : color.c) {
                c += ramp;
            }
            for (const auto& c : clutter) {
                if ((px - c.x) * (px - c.x) + (py - c.y) * (py - c.y) <= c.r * c.r) {
                    color = c.color;
                }
            }
            if (inside(object, px, py)) {
                const double stripe = 0.8 + 0.2 * std::sin(stripe_freq * (px * cd + py * sd) + stripe_phase);
                for (int ch = 0; ch < 3; ++ch) {
                    color.c[ch] = foreground.c[ch] * stripe;
                }
            }
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double value = color.c[ch] + noise * pixel_noise(rng);
                out.image[(ch * image_size + y) * image_size + x] = std::clamp(value, 0.0, 1.0);
            }
        }
    }
    return out;
}

TaskData generate_task(const SyntheticTaskSpec& spec) {
    validate(spec);
    TaskData data;
    std::vector<int> all(spec.pretrain_classes);
    for (std::size_t c = 0; c < all.size(); ++c) {
        all[c] = static_cast<int>(c);
    }
    data.label_map = resolved_downstream_classes(spec);
    data.pretrain_train = make_split(spec, Split::pretrain_train, spec.n_pretrain, all, 0.0);
    data.pretrain_test = make_split(spec, Split::pretrain_test, spec.n_pretrain_test, all, 0.0);
    data.train = make_split(spec, Split::train, spec.n_train, data.label_map, spec.style_shift);
    data.test = make_split(spec, Split::test, spec.n_test, data.label_map, spec.style_shift);
    return data;
}

Tensor batch_images(const Dataset& data, std::span<const std::size_t> indices) {
    const std::size_t stride = data.image_stride();
    std::vector<double> values(indices.size() * stride);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        require(indices[b] < data.size(), "batch index out of range");
        std::copy_n(data.images.begin() + static_cast<std::ptrdiff_t>(indices[b] * stride), stride,
                    values.begin() + static_cast<std::ptrdiff_t>(b * stride));
    }
    return Tensor(Shape{indices.size(), data.channels, data.height, data.width}, std::move(values));
}

std::vector<int> batch_labels(const Dataset& data, std::span<const std::size_t> indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) {
        labels.push_back(data.labels.at(i));
    }
    return labels;
}

Tensor batch_masks(const Dataset& data, std::span<const std::size_t> indices) {
    require(!data.masks.empty(), "dataset has no masks");
    const std::size_t area = data.height * data.width;
    std::vector<double> values(indices.size() * area);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        for (std::size_t i = 0; i < area; ++i) {
            values[b * area + i] = data.masks[indices[b] * area + i];
        }
    }
    return Tensor(Shape{indices.size(), data.height, data.width}, std::move(values));
}

std::string dataset_hash(const Dataset& data) {
    auto bytes = serialize(data);
    return sha256_hex(bytes);
}

void save_task(const TaskData& data, const SyntheticTaskSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const Dataset* splits[4] = {&data.pretrain_train, &data.pretrain_test, &data.train, &data.test};
    Json manifest{{"schema_version", kManifestVersion}, {"spec", to_json(spec)}, {"label_map", data.label_map}};
    for (std::size_t k = 0; k < 4; ++k) {
        auto bytes = serialize(*splits[k]);
        const std::string file = std::string(kSplitNames[k]) + ".bin";
        std::ofstream out(dir / file, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            fail(ErrorKind::io, "failed to write " + (dir / file).string());
        }
        manifest["splits"][kSplitNames[k]] = {{"file", file}, {"count", splits[k]->size()}, {"sha256", sha256_hex(bytes)}};
    }
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

TaskData load_task(const std::filesystem::path& dir) {
    std::ifstream manifest_file(dir / "manifest.json");
    if (!manifest_file) {
        fail(ErrorKind::not_found, "no dataset manifest in " + dir.string());
    }
    Json manifest = Json::parse(manifest_file);
    TaskData data;
    data.label_map = manifest.at("label_map").get<std::vector<int>>();
    Dataset* splits[4] = {&data.pretrain_train, &data.pretrain_test, &data.train, &data.test};
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& entry = manifest.at("splits").at(kSplitNames[k]);
        std::ifstream in(dir / entry.at("file").get<std::string>(), std::ios::binary);
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
            fail(ErrorKind::io, std::string("hash mismatch for split ") + kSplitNames[k]);
        }
        *splits[k] = deserialize(bytes);
    }
    return data;
}

}  // namespace drd
