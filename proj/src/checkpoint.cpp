#include "url/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "url/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");
static_assert(sizeof(double) == 8, "checkpoint serialization assumes binary64 doubles");

namespace url {

namespace {

constexpr char kMagic[4] = {'U', 'R', 'L', 'M'};

template <typename T>
void write_raw(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");

    out.write(kMagic, 4);
    write_raw<std::uint32_t>(out, kCheckpointVersion);
    write_raw<std::uint64_t>(out, store.size());
    for (const auto& [name, tensor] : store) {
        write_raw<std::uint64_t>(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(tensor.rank()));
        for (int i = 0; i < tensor.rank(); ++i)
            write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(tensor.dim(i)));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size()) * 8);
    }
    if (!out) throw IoError("checkpoint: write to '" + path + "' failed");
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in '" + path + "'");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: unsupported format version in '" + path + "'");

    ParamStore store;
    const auto count = read_raw<std::uint64_t>(in);
    for (std::uint64_t t = 0; t < count; ++t) {
        const auto name_len = read_raw<std::uint64_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw IoError("checkpoint: truncated file");

        const auto rank = read_raw<std::uint64_t>(in);
        std::vector<std::int64_t> shape;
        std::int64_t total = 1;
        for (std::uint64_t i = 0; i < rank; ++i) {
            const auto d = read_raw<std::uint64_t>(in);
            shape.push_back(static_cast<std::int64_t>(d));
            total *= static_cast<std::int64_t>(d);
        }
        std::vector<double> values(static_cast<std::size_t>(total));
        in.read(reinterpret_cast<char*>(values.data()), total * 8);
        if (!in) throw IoError("checkpoint: truncated file");
        store.insert(name, Tensor::from_values(std::move(shape), std::move(values)));
    }
    return store;
}

}  // namespace url
