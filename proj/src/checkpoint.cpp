#include "drd/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drd/error.hpp"

namespace drd {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'D', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Cursor {
public:
    explicit Cursor(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    void read(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            fail(ErrorKind::io, "checkpoint truncated");
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    template <class T>
    T get() {
        T v{};
        read(&v, sizeof(T));
        return v;
    }

    std::string get_string(std::size_t n) {
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorKind::io, "cannot open " + tmp.string());
        }
        out.write(kMagic, sizeof(kMagic));
        put<std::uint32_t>(out, kCheckpointVersion);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.arrays.size()));
        for (const auto& [name, array] : checkpoint.arrays) {
            require(element_count(array.shape) == array.values.size(), "checkpoint array '" + name + "' shape mismatch");
            put_string(out, name);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(array.shape.size()));
            for (auto d : array.shape) {
                put<std::uint64_t>(out, d);
            }
            out.write(reinterpret_cast<const char*>(array.values.data()),
                      static_cast<std::streamsize>(array.values.size() * sizeof(double)));
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.texts.size()));
        for (const auto& [name, text] : checkpoint.texts) {
            put_string(out, name);
            put<std::uint64_t>(out, text.size());
            out.write(text.data(), static_cast<std::streamsize>(text.size()));
        }
        if (!out) {
            fail(ErrorKind::io, "failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::not_found, "no checkpoint at " + path.string());
    }
    Cursor cur(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
    char magic[8];
    cur.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        fail(ErrorKind::io, path.string() + " is not a checkpoint");
    }
    const auto version = cur.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::io, "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    const auto n_arrays = cur.get<std::uint32_t>();
    for (std::uint32_t a = 0; a < n_arrays; ++a) {
        const auto name = cur.get_string(cur.get<std::uint32_t>());
        Checkpoint::Array array;
        array.shape.resize(cur.get<std::uint32_t>());
        for (auto& d : array.shape) {
            d = cur.get<std::uint64_t>();
        }
        array.values.resize(element_count(array.shape));
        cur.read(array.values.data(), array.values.size() * sizeof(double));
        ck.arrays.emplace(name, std::move(array));
    }
    const auto n_texts = cur.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < n_texts; ++t) {
        const auto name = cur.get_string(cur.get<std::uint32_t>());
        const auto size = cur.get<std::uint64_t>();
        ck.texts.emplace(name, cur.get_string(size));
    }
    if (!cur.done()) {
        fail(ErrorKind::io, "trailing bytes in checkpoint " + path.string());
    }
    return ck;
}

void store_parameters(Checkpoint& checkpoint, const std::string& prefix, std::span<const Tensor> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].data();
        checkpoint.arrays[prefix + "." + std::to_string(i)] =
            Checkpoint::Array{params[i].shape(), std::vector<double>(values.begin(), values.end())};
    }
}

void load_parameters(const Checkpoint& checkpoint, const std::string& prefix, std::span<const Tensor> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto name = prefix + "." + std::to_string(i);
        auto it = checkpoint.arrays.find(name);
        if (it == checkpoint.arrays.end()) {
            fail(ErrorKind::not_found, "checkpoint has no array '" + name + "'");
        }
        if (it->second.shape != params[i].shape()) {
            fail(ErrorKind::validation, "checkpoint array '" + name + "' has shape " + to_string(it->second.shape) +
                                            ", expected " + to_string(params[i].shape()));
        }
        Tensor target = params[i];
        std::copy(it->second.values.begin(), it->second.values.end(), target.mutable_data().begin());
    }
}

}  // namespace drd
