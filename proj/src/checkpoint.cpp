#include "iakd/checkpoint.hpp"

#include "iakd/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace iakd {

namespace {

static_assert(std::numeric_limits<float>::is_iec559);

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries) {
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError("entry name too long: " + e.name);
        if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw CheckpointError("too many dims in " + e.name);
        if (shape_size(e.shape) != e.values.size()) throw CheckpointError("entry '" + e.name + "' size does not match its shape");
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<std::uint8_t>(e.shape.size()));
        for (auto d : e.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (float f : e.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.get_string(4) != std::string(kCheckpointMagic, 4)) throw CheckpointError("bad checkpoint magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    std::vector<NamedTensor> entries;
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedTensor e;
        e.name = r.get_string(r.get<std::uint16_t>());
        const auto ndim = r.get<std::uint8_t>();
        for (std::uint8_t d = 0; d < ndim; ++d) e.shape.push_back(r.get<std::uint32_t>());
        const std::size_t n = shape_size(e.shape);
        if (n > bytes.size()) throw CheckpointError("checkpoint truncated in entry '" + e.name + "'");
        e.values.resize(n);
        for (auto& f : e.values) f = std::bit_cast<float>(r.get<std::uint32_t>());
        entries.push_back(std::move(e));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint entries");
    return entries;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
    const auto bytes = encode_container(entries);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed for '" + path.string() + "'");
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_container(bytes);
}

NamedTensor to_named(const std::string& name, const Tensor& t) {
    NamedTensor e{name, t.shape, {}};
    e.values.reserve(t.size());
    for (double v : t.data) e.values.push_back(static_cast<float>(v));
    return e;
}

} // namespace iakd
