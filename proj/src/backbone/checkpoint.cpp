#include "cxrssl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl::backbone {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "CXRSSLCK";

template <typename T>
void put(std::string& out, T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out.append(raw, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto view = bytes_.substr(pos_, n);
        pos_ += n;
        return view;
    }

    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) {
            throw ArtifactError("checkpoint truncated");
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint8_t dtype_tag(const torch::Tensor& t) {
    switch (t.scalar_type()) {
        case torch::kFloat32: return 1;
        case torch::kFloat64: return 2;
        case torch::kInt64: return 3;
        default: throw ArtifactError("checkpoint: unsupported dtype " + std::string(c10::toString(t.scalar_type())));
    }
}

torch::ScalarType dtype_from_tag(std::uint8_t tag) {
    switch (tag) {
        case 1: return torch::kFloat32;
        case 2: return torch::kFloat64;
        case 3: return torch::kInt64;
        default: throw ArtifactError("checkpoint: unknown dtype tag " + std::to_string(tag));
    }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic);
    put<std::uint32_t>(out, kCheckpointFormatVersion);
    const std::string meta = ckpt.metadata.dump();
    put<std::uint64_t>(out, meta.size());
    out.append(meta);
    put<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        const auto t = tensor.detach().contiguous().cpu();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put<std::uint8_t>(out, dtype_tag(t));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dim()));
        for (const auto d : t.sizes()) {
            put<std::int64_t>(out, d);
        }
        out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
    }
    put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (bytes.size() < kMagic.size() || in.take(kMagic.size()) != kMagic) {
        throw ArtifactError("not a checkpoint (bad magic)");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointFormatVersion) {
        throw ArtifactError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    }
    if (bytes.size() < sizeof(std::uint64_t)) {
        throw ArtifactError("checkpoint truncated");
    }
    const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
    if (stored != fnv1a64(body)) {
        throw ArtifactError("checkpoint checksum mismatch (corrupt file)");
    }

    Checkpoint ckpt;
    const auto meta_len = in.get<std::uint64_t>();
    try {
        ckpt.metadata = nlohmann::json::parse(in.take(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError(std::string("checkpoint metadata: ") + e.what());
    }
    const auto count = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = in.get<std::uint32_t>();
        std::string name(in.take(name_len));
        const auto dtype = dtype_from_tag(in.get<std::uint8_t>());
        const auto ndim = in.get<std::uint8_t>();
        std::vector<std::int64_t> dims(ndim);
        for (auto& d : dims) {
            d = in.get<std::int64_t>();
            if (d < 0) {
                throw ArtifactError("checkpoint: negative dimension in " + name);
            }
        }
        auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
        const auto raw = in.take(static_cast<std::size_t>(t.numel() * t.element_size()));
        std::memcpy(t.data_ptr(), raw.data(), raw.size());
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    if (in.position() != body.size()) {
        throw ArtifactError("checkpoint has trailing bytes");
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ArtifactError("cannot write checkpoint " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw ArtifactError("failed writing checkpoint " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArtifactError("cannot open checkpoint " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return deserialize_checkpoint(buffer.str());
    } catch (const ArtifactError& e) {
        throw ArtifactError(path.string() + ": " + e.what());
    }
}

void export_module(const torch::nn::Module& module, const std::string& prefix,
                   std::map<std::string, torch::Tensor>& out) {
    for (const auto& item : module.named_parameters()) {
        out[prefix + item.key()] = item.value().detach().clone();
    }
    for (const auto& item : module.named_buffers()) {
        out[prefix + item.key()] = item.value().detach().clone();
    }
}

void import_module(torch::nn::Module& module, const std::string& prefix,
                   const std::map<std::string, torch::Tensor>& tensors) {
    torch::NoGradGuard guard;
    auto load = [&](const std::string& name, torch::Tensor& target) {
        const auto it = tensors.find(prefix + name);
        if (it == tensors.end()) {
            throw ArtifactError("checkpoint is missing tensor '" + prefix + name + "'");
        }
        if (it->second.sizes() != target.sizes()) {
            throw ArtifactError("checkpoint tensor '" + prefix + name + "' has shape " +
                                std::string(c10::str(it->second.sizes())) + ", expected " +
                                std::string(c10::str(target.sizes())));
        }
        target.copy_(it->second);
    };
    for (auto& item : module.named_parameters()) {
        load(item.key(), item.value());
    }
    for (auto& item : module.named_buffers()) {
        load(item.key(), item.value());
    }
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& name, const torch::Tensor& value) {
        const auto t = value.detach().contiguous().cpu();
        h = fnv1a64(name, h);
        h = fnv1a64(std::string(c10::str(t.sizes())), h);
        h = fnv1a64(std::string_view(static_cast<const char*>(t.data_ptr()),
                                     static_cast<std::size_t>(t.numel() * t.element_size())),
                    h);
    };
    for (const auto& item : module.named_parameters()) {
        mix(item.key(), item.value());
    }
    for (const auto& item : module.named_buffers()) {
        mix(item.key(), item.value());
    }
    return h;
}

}  // namespace cxrssl::backbone
