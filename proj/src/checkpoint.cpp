#include "vawi/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vawi/common.hpp"

namespace vawi {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'W', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void write_f32_le(std::ostream& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    write_le(out, bits);
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw IntegrityError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

float read_f32_le(std::istream& in) {
    const std::uint32_t bits = read_le<std::uint32_t>(in);
    float value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
}

} // namespace

void save_checkpoint(const ParameterPartition& partition, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write '" + path + "'");

    out.write(kMagic, sizeof(kMagic));
    write_le(out, kVersion);
    write_le(out, static_cast<std::uint32_t>(partition.entries.size()));

    for (const auto& e : partition.entries) {
        if (e.name.size() > 0xFFFF) {
            throw FormatError("checkpoint: tensor name too long: " + e.name);
        }
        write_le(out, static_cast<std::uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_le(out, static_cast<std::uint8_t>(e.group));
        write_le(out, static_cast<std::uint8_t>(e.trainable ? 1 : 0));
        write_le(out, static_cast<std::uint8_t>(2));
        write_le(out, static_cast<std::uint64_t>(e.tensor.rows()));
        write_le(out, static_cast<std::uint64_t>(e.tensor.cols()));
        for (double v : e.tensor.data()) write_f32_le(out, static_cast<float>(v));
    }
    if (!out) throw IntegrityError("checkpoint: write failure on '" + path + "'");
}

ParameterPartition load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("checkpoint: bad magic in '" + path + "'");
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto count = read_le<std::uint32_t>(in);

    ParameterPartition partition;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = read_le<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IntegrityError("checkpoint: truncated tensor name");
        const auto group = read_le<std::uint8_t>(in);
        if (group > 3) throw FormatError("checkpoint: unknown group id " + std::to_string(group));
        const auto trainable = read_le<std::uint8_t>(in);
        const auto rank = read_le<std::uint8_t>(in);
        if (rank != 2) throw FormatError("checkpoint: unsupported rank " + std::to_string(rank));
        const auto rows = read_le<std::uint64_t>(in);
        const auto cols = read_le<std::uint64_t>(in);
        std::vector<double> data(rows * cols);
        for (double& v : data) v = static_cast<double>(read_f32_le(in));
        Tensor tensor = Tensor::from_data(rows, cols, std::move(data), trainable != 0);
        partition.add(name, std::move(tensor), static_cast<Group>(group), trainable != 0);
    }
    // Anything after the declared tensors is corruption.
    in.peek();
    if (!in.eof()) throw IntegrityError("checkpoint: trailing bytes after last tensor");
    return partition;
}

void apply_checkpoint(ParameterPartition& target, const ParameterPartition& source) {
    for (auto& dst : target.entries) {
        const ParameterPartition::Entry* src = nullptr;
        for (const auto& e : source.entries) {
            if (e.name == dst.name) {
                src = &e;
                break;
            }
        }
        if (!src) throw FormatError("checkpoint: missing tensor '" + dst.name + "'");
        if (src->tensor.rows() != dst.tensor.rows() || src->tensor.cols() != dst.tensor.cols()) {
            throw DimensionError("checkpoint: tensor '" + dst.name + "' is " +
                                 src->tensor.shape_string() + ", expected " +
                                 dst.tensor.shape_string());
        }
        auto& out = dst.tensor.mutable_data();
        auto in = src->tensor.data();
        std::copy(in.begin(), in.end(), out.begin());
    }
}

} // namespace vawi
