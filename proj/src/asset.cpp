#include "ghs/asset.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <memory>

namespace ghs {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndianSentinel = 0x01020304u;
constexpr size_t kBlobAlign = 16;

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

std::uint32_t blob_crc(const std::vector<float>& v) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(v.data()),
              static_cast<uInt>(v.size() * sizeof(float))));
}

void write_exact(FILE* f, const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f) != n)
        throw std::runtime_error("asset: short write");
}

void read_exact(FILE* f, void* p, size_t n, const char* what) {
    if (std::fread(p, 1, n, f) != n)
        throw CorruptAsset(std::string("asset: truncated file at ") + what);
}

}  // namespace

void BlobFile::save(const std::string& path, const std::string& magic) const {
    if (magic.size() != 4) throw InvalidArgument("asset: magic must be 4 bytes");
    nlohmann::json m = manifest;
    nlohmann::json blob_list = nlohmann::json::array();
    for (const auto& [name, data] : blobs)
        blob_list.push_back({{"name", name},
                             {"count", data.size()},
                             {"crc32", blob_crc(data)}});
    m["blobs"] = blob_list;
    std::string mstr = m.dump();

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("asset: cannot open " + path);
    write_exact(f.get(), magic.data(), 4);
    write_exact(f.get(), &kVersion, 4);
    write_exact(f.get(), &kEndianSentinel, 4);
    std::uint64_t mlen = mstr.size();
    write_exact(f.get(), &mlen, 8);
    write_exact(f.get(), mstr.data(), mstr.size());

    size_t offset = 4 + 4 + 4 + 8 + mstr.size();
    static const char pad[kBlobAlign] = {0};
    for (const auto& [name, data] : blobs) {
        size_t misalign = offset % kBlobAlign;
        if (misalign) {
            write_exact(f.get(), pad, kBlobAlign - misalign);
            offset += kBlobAlign - misalign;
        }
        write_exact(f.get(), data.data(), data.size() * sizeof(float));
        offset += data.size() * sizeof(float);
    }
}

BlobFile BlobFile::load(const std::string& path, const std::string& magic) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("asset: cannot open " + path);

    char m[4];
    read_exact(f.get(), m, 4, "magic");
    if (std::memcmp(m, magic.data(), 4) != 0)
        throw CorruptAsset("asset: bad magic bytes (expected " + magic + ")");
    std::uint32_t version, endian;
    read_exact(f.get(), &version, 4, "version");
    if (version != kVersion)
        throw CorruptAsset("asset: unsupported version " + std::to_string(version));
    read_exact(f.get(), &endian, 4, "endian sentinel");
    if (endian != kEndianSentinel)
        throw CorruptAsset("asset: endianness mismatch (sentinel "
                           + std::to_string(endian) + ")");
    std::uint64_t mlen;
    read_exact(f.get(), &mlen, 8, "manifest length");
    std::string mstr(mlen, '\0');
    read_exact(f.get(), mstr.data(), mlen, "manifest");

    BlobFile bf;
    try {
        bf.manifest = nlohmann::json::parse(mstr);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptAsset(std::string("asset: manifest parse error: ") + e.what());
    }
    if (!bf.manifest.contains("blobs"))
        throw CorruptAsset("asset: manifest missing 'blobs'");

    size_t offset = 4 + 4 + 4 + 8 + mlen;
    for (const auto& entry : bf.manifest["blobs"]) {
        std::string name = entry.at("name");
        size_t count = entry.at("count");
        std::uint32_t expected_crc = entry.at("crc32");
        size_t misalign = offset % kBlobAlign;
        if (misalign) {
            char skip[kBlobAlign];
            read_exact(f.get(), skip, kBlobAlign - misalign, "padding");
            offset += kBlobAlign - misalign;
        }
        std::vector<float> data(count);
        read_exact(f.get(), data.data(), count * sizeof(float), name.c_str());
        offset += count * sizeof(float);
        if (blob_crc(data) != expected_crc)
            throw CorruptAsset("asset: checksum mismatch in blob '" + name + "'");
        bf.blobs.emplace(std::move(name), std::move(data));
    }
    bf.manifest.erase("blobs");
    return bf;
}

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

std::vector<double> to_f64(const std::vector<float>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

}  // namespace ghs
