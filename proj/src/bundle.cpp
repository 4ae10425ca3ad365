#include "purikit/bundle.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "bundle payload writing assumes a little-endian host");

namespace purikit {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'P', 'K', 'I', 'T'};

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, const T& value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

void append_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + len);
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

    template <typename T>
    T take() {
        if (pos_ + sizeof(T) > len_) throw std::runtime_error("bundle: truncated file at offset " + std::to_string(pos_));
        T value;
        std::memcpy(&value, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    const std::uint8_t* take_span(std::size_t n) {
        if (pos_ + n > len_) throw std::runtime_error("bundle: truncated file at offset " + std::to_string(pos_));
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return len_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed) {
    static const auto table = make_crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

const char* ArtifactBundle::dtype_name(DType d) {
    switch (d) {
        case DType::F64: return "f64";
        case DType::F32: return "f32";
        case DType::I64: return "i64";
        case DType::I32: return "i32";
    }
    throw std::logic_error("bundle: bad dtype");
}

std::size_t ArtifactBundle::dtype_size(DType d) {
    switch (d) {
        case DType::F64: case DType::I64: return 8;
        case DType::F32: case DType::I32: return 4;
    }
    throw std::logic_error("bundle: bad dtype");
}

void ArtifactBundle::insert(Entry e) {
    const std::uint64_t want = element_count(e.shape);
    const std::uint64_t got = std::visit([](const auto& v) { return static_cast<std::uint64_t>(v.size()); }, e.payload);
    if (want != got)
        throw std::invalid_argument("bundle: array '" + e.name + "' shape declares " + std::to_string(want) +
                                    " elements but payload has " + std::to_string(got));
    for (auto& existing : entries_) {
        if (existing.name == e.name) {
            existing = std::move(e);
            return;
        }
    }
    entries_.push_back(std::move(e));
}

void ArtifactBundle::put_f64(const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data) {
    insert({name, DType::F64, std::move(shape), std::move(data)});
}
void ArtifactBundle::put_f32(const std::string& name, std::vector<std::uint64_t> shape, std::vector<float> data) {
    insert({name, DType::F32, std::move(shape), std::move(data)});
}
void ArtifactBundle::put_i64(const std::string& name, std::vector<std::uint64_t> shape, std::vector<std::int64_t> data) {
    insert({name, DType::I64, std::move(shape), std::move(data)});
}
void ArtifactBundle::put_i32(const std::string& name, std::vector<std::uint64_t> shape, std::vector<std::int32_t> data) {
    insert({name, DType::I32, std::move(shape), std::move(data)});
}

const ArtifactBundle::Entry& ArtifactBundle::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw std::out_of_range("bundle: no array named '" + name + "'");
}

bool ArtifactBundle::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const std::vector<double>& ArtifactBundle::f64(const std::string& name) const {
    return std::get<std::vector<double>>(find(name).payload);
}
const std::vector<float>& ArtifactBundle::f32(const std::string& name) const {
    return std::get<std::vector<float>>(find(name).payload);
}
const std::vector<std::int64_t>& ArtifactBundle::i64(const std::string& name) const {
    return std::get<std::vector<std::int64_t>>(find(name).payload);
}
const std::vector<std::int32_t>& ArtifactBundle::i32(const std::string& name) const {
    return std::get<std::vector<std::int32_t>>(find(name).payload);
}
const std::vector<std::uint64_t>& ArtifactBundle::shape(const std::string& name) const {
    return find(name).shape;
}
ArtifactBundle::DType ArtifactBundle::dtype(const std::string& name) const {
    return find(name).dtype;
}

void save_bundle(const ArtifactBundle& bundle, const std::filesystem::path& path) {
    // The stored manifest carries the caller's metadata plus a generated
    // "arrays" section declaring every payload shape.
    nlohmann::json manifest = bundle.manifest();
    nlohmann::json arrays = nlohmann::json::object();
    for (const auto& e : bundle.entries()) {
        arrays[e.name] = {{"dtype", ArtifactBundle::dtype_name(e.dtype)}, {"shape", e.shape}};
    }
    manifest["arrays"] = std::move(arrays);
    const std::string manifest_text = manifest.dump(2);

    std::vector<std::uint8_t> payload;
    for (const auto& e : bundle.entries()) {
        append_raw(payload, static_cast<std::uint32_t>(e.name.size()));
        append_bytes(payload, e.name.data(), e.name.size());
        append_raw(payload, static_cast<std::uint32_t>(e.dtype));
        append_raw(payload, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) append_raw(payload, d);
        std::visit(
            [&](const auto& v) {
                using Elem = typename std::decay_t<decltype(v)>::value_type;
                append_raw(payload, static_cast<std::uint64_t>(v.size() * sizeof(Elem)));
                append_bytes(payload, v.data(), v.size() * sizeof(Elem));
            },
            e.payload);
    }
    const std::uint32_t checksum = crc32(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("bundle: cannot open '" + path.string() + "' for writing");
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t mlen = manifest_text.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw std::runtime_error("bundle: write failed for '" + path.string() + "'");
}

ArtifactBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("bundle: cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(bytes.data(), bytes.size());

    const std::uint8_t* magic = r.take_span(4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bundle: bad magic in '" + path.string() + "'");
    const auto version = r.take<std::uint32_t>();
    if (version != kVersion)
        throw std::runtime_error("bundle: unknown format version " + std::to_string(version));
    const auto mlen = r.take<std::uint64_t>();
    const std::uint8_t* mbytes = r.take_span(mlen);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mbytes, mbytes + mlen);
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error(std::string("bundle: manifest is not valid JSON: ") + ex.what());
    }
    if (!manifest.contains("arrays") || !manifest["arrays"].is_object())
        throw std::runtime_error("bundle: manifest lacks the arrays declaration");

    if (r.remaining() < sizeof(std::uint32_t))
        throw std::runtime_error("bundle: truncated file at offset " + std::to_string(r.pos()));
    const std::size_t payload_len = r.remaining() - sizeof(std::uint32_t);
    const std::size_t payload_start = r.pos();
    {
        const std::uint32_t stored = [&] {
            std::uint32_t c;
            std::memcpy(&c, bytes.data() + payload_start + payload_len, sizeof(c));
            return c;
        }();
        const std::uint32_t actual = crc32(bytes.data() + payload_start, payload_len);
        if (stored != actual)
            throw std::runtime_error("bundle: payload checksum mismatch in '" + path.string() + "'");
    }

    ArtifactBundle bundle;
    const nlohmann::json declared = manifest["arrays"];
    manifest.erase("arrays");
    bundle.manifest() = std::move(manifest);

    std::size_t declared_seen = 0;
    while (r.pos() < payload_start + payload_len) {
        const auto name_len = r.take<std::uint32_t>();
        const std::uint8_t* name_bytes = r.take_span(name_len);
        const std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
        const auto dtype_tag = r.take<std::uint32_t>();
        if (dtype_tag > 3) throw std::runtime_error("bundle: array '" + name + "' has unknown dtype tag");
        const auto dtype = static_cast<ArtifactBundle::DType>(dtype_tag);
        const auto rank = r.take<std::uint32_t>();
        std::vector<std::uint64_t> shape(rank);
        for (auto& d : shape) d = r.take<std::uint64_t>();
        const auto byte_len = r.take<std::uint64_t>();
        const std::uint8_t* data = r.take_span(byte_len);

        if (!declared.contains(name))
            throw std::runtime_error("bundle: array '" + name + "' is not declared in the manifest");
        const auto& decl = declared[name];
        if (decl.at("dtype").get<std::string>() != ArtifactBundle::dtype_name(dtype))
            throw std::runtime_error("bundle: array '" + name + "' dtype disagrees with the manifest");
        if (decl.at("shape").get<std::vector<std::uint64_t>>() != shape)
            throw std::runtime_error("bundle: array '" + name + "' shape disagrees with the manifest");
        const std::uint64_t expect_bytes = element_count(shape) * ArtifactBundle::dtype_size(dtype);
        if (byte_len != expect_bytes)
            throw std::runtime_error("bundle: array '" + name + "' byte length disagrees with its shape");
        ++declared_seen;

        switch (dtype) {
            case ArtifactBundle::DType::F64: {
                std::vector<double> v(byte_len / 8);
                std::memcpy(v.data(), data, byte_len);
                bundle.put_f64(name, std::move(shape), std::move(v));
                break;
            }
            case ArtifactBundle::DType::F32: {
                std::vector<float> v(byte_len / 4);
                std::memcpy(v.data(), data, byte_len);
                bundle.put_f32(name, std::move(shape), std::move(v));
                break;
            }
            case ArtifactBundle::DType::I64: {
                std::vector<std::int64_t> v(byte_len / 8);
                std::memcpy(v.data(), data, byte_len);
                bundle.put_i64(name, std::move(shape), std::move(v));
                break;
            }
            case ArtifactBundle::DType::I32: {
                std::vector<std::int32_t> v(byte_len / 4);
                std::memcpy(v.data(), data, byte_len);
                bundle.put_i32(name, std::move(shape), std::move(v));
                break;
            }
        }
    }
    if (declared_seen != declared.size())
        throw std::runtime_error("bundle: manifest declares arrays missing from the payload");
    return bundle;
}

}  // namespace purikit
