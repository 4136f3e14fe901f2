#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biome/matrix.hpp"

namespace biome::io {

static_assert(std::endian::native == std::endian::little,
              "tensor archives are little-endian; big-endian hosts are unsupported");

// On-disk layout:
//   [u64 little-endian header length][header JSON][payload]
// Header maps tensor name -> {shape, dtype ("f32"|"f64"), offset, length},
// offsets relative to the payload start. Readers reject overlapping or
// out-of-bounds entries, length/shape disagreements, and trailing bytes.
class TensorArchive {
public:
    enum class DType { F32, F64 };

    struct Entry {
        DType dtype = DType::F32;
        std::vector<long long> shape;
        std::vector<unsigned char> bytes;

        long long elements() const {
            long long n = 1;
            for (long long s : shape) n *= s;
            return n;
        }
    };

    static size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }
    static const char* dtype_name(DType d) { return d == DType::F32 ? "f32" : "f64"; }

    bool has(const std::string& name) const { return entries_.count(name) > 0; }
    size_t size() const { return entries_.size(); }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    void put(const std::string& name, const Mat& m, DType dtype) {
        require(!name.empty(), "archive: empty tensor name");
        Entry e;
        e.dtype = dtype;
        e.shape = {m.rows, m.cols};
        e.bytes.resize(m.size() * dtype_size(dtype));
        if (dtype == DType::F64) {
            std::memcpy(e.bytes.data(), m.v.data(), e.bytes.size());
        } else {
            for (size_t i = 0; i < m.size(); ++i) {
                const float f = static_cast<float>(m.v[i]);
                std::memcpy(e.bytes.data() + i * 4, &f, 4);
            }
        }
        entries_[name] = std::move(e);
    }

    void put_vector(const std::string& name, const std::vector<double>& v, DType dtype) {
        Mat m(1, static_cast<int>(v.size()));
        m.v = v;
        put(name, m, dtype);
        entries_[name].shape = {static_cast<long long>(v.size())};
    }

    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw InputError("archive: missing tensor '" + name + "'");
        return it->second;
    }

    // Values as doubles regardless of stored dtype; 1-D tensors come back as
    // a single row.
    Mat get_mat(const std::string& name) const {
        const Entry& e = entry(name);
        require(e.shape.size() == 1 || e.shape.size() == 2,
                "archive: tensor '" + name + "' is not 1-D or 2-D");
        const int rows = e.shape.size() == 2 ? static_cast<int>(e.shape[0]) : 1;
        const int cols = static_cast<int>(e.shape.size() == 2 ? e.shape[1] : e.shape[0]);
        Mat m(rows, cols);
        if (e.dtype == DType::F64) {
            std::memcpy(m.v.data(), e.bytes.data(), e.bytes.size());
        } else {
            for (size_t i = 0; i < m.size(); ++i) {
                float f;
                std::memcpy(&f, e.bytes.data() + i * 4, 4);
                m.v[i] = f;
            }
        }
        return m;
    }

    long long total_scalars() const {
        long long n = 0;
        for (const auto& [k, e] : entries_) n += e.elements();
        return n;
    }

    void write_file(const std::string& path) const {
        nlohmann::json header = nlohmann::json::object();
        unsigned long long offset = 0;
        for (const auto& [name, e] : entries_) {  // std::map: sorted, deterministic
            header[name] = {{"shape", e.shape},
                            {"dtype", dtype_name(e.dtype)},
                            {"offset", offset},
                            {"length", e.bytes.size()}};
            offset += e.bytes.size();
        }
        const std::string hs = header.dump();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("archive: cannot open '" + path + "' for writing");
        const uint64_t hlen = hs.size();
        out.write(reinterpret_cast<const char*>(&hlen), 8);
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& [name, e] : entries_)
            out.write(reinterpret_cast<const char*>(e.bytes.data()),
                      static_cast<std::streamsize>(e.bytes.size()));
        if (!out) throw InputError("archive: write failed for '" + path + "'");
    }

    static TensorArchive read_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("archive: cannot open '" + path + "'");
        std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return from_bytes(blob);
    }

    static TensorArchive from_bytes(const std::vector<char>& blob) {
        require(blob.size() >= 8, "archive: truncated (no header length)");
        uint64_t hlen = 0;
        std::memcpy(&hlen, blob.data(), 8);
        require(8 + hlen <= blob.size(), "archive: header length exceeds file size");
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(blob.data() + 8, blob.data() + 8 + hlen);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("archive: malformed header: ") + e.what());
        }
        require(header.is_object(), "archive: header must be a JSON object");

        const size_t payload_start = 8 + hlen;
        const size_t payload_size = blob.size() - payload_start;
        TensorArchive a;
        std::vector<std::pair<unsigned long long, unsigned long long>> ranges;
        unsigned long long used_end = 0;
        for (auto it = header.begin(); it != header.end(); ++it) {
            const nlohmann::json& j = it.value();
            require(j.contains("shape") && j.contains("dtype") && j.contains("offset") &&
                        j.contains("length"),
                    "archive: entry '" + it.key() + "' missing fields");
            Entry e;
            const std::string dt = j["dtype"].get<std::string>();
            if (dt == "f32") e.dtype = DType::F32;
            else if (dt == "f64") e.dtype = DType::F64;
            else throw InputError("archive: unsupported dtype '" + dt + "'");
            e.shape = j["shape"].get<std::vector<long long>>();
            for (long long s : e.shape) require(s > 0, "archive: non-positive dim");
            const auto offset = j["offset"].get<unsigned long long>();
            const auto length = j["length"].get<unsigned long long>();
            require(length == static_cast<unsigned long long>(e.elements()) * dtype_size(e.dtype),
                    "archive: entry '" + it.key() + "' length does not match shape");
            require(offset + length <= payload_size, "archive: entry '" + it.key() + "' out of bounds");
            ranges.emplace_back(offset, offset + length);
            used_end = std::max(used_end, offset + length);
            e.bytes.resize(length);
            std::memcpy(e.bytes.data(), blob.data() + payload_start + offset, length);
            a.entries_[it.key()] = std::move(e);
        }
        std::sort(ranges.begin(), ranges.end());
        for (size_t i = 1; i < ranges.size(); ++i)
            require(ranges[i].first >= ranges[i - 1].second, "archive: overlapping tensors");
        require(used_end == payload_size, "archive: trailing bytes after payload");
        return a;
    }

private:
    std::map<std::string, Entry> entries_;
};

}  // namespace biome::io
