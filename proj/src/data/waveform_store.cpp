#include "shdbench/data/waveform_store.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <memory>

namespace shdbench::data {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'W'};
constexpr uint32_t kFormatVersion = 1;
constexpr uint8_t kDtypeF32 = 1;
constexpr size_t kHeaderSize = 4 + 4 + 8 + 4 + 4 + 1 + 7;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(unsigned char* p, uint32_t v) {
    p[0] = v & 0xFF; p[1] = (v >> 8) & 0xFF; p[2] = (v >> 16) & 0xFF; p[3] = (v >> 24) & 0xFF;
}
void put_u64(unsigned char* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = (v >> (8 * i)) & 0xFF;
}
uint32_t get_u32(const unsigned char* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint64_t get_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

}  // namespace

uint32_t write_waveform_store(const std::vector<const WaveformF*>& waveforms, const std::string& path) {
    require(!waveforms.empty(), ErrCat::format, "waveform store: empty record list");
    for (const auto* w : waveforms) {
        require(w != nullptr, ErrCat::internal, "waveform store: null waveform");
        require(w->rows() == kLeads && w->cols() == kSamples, ErrCat::format,
                "waveform store: expected 12x2500 waveform, got " + std::to_string(w->rows()) + "x" +
                    std::to_string(w->cols()));
    }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    require(f != nullptr, ErrCat::io, "cannot write '" + path + "'");

    unsigned char header[kHeaderSize] = {0};
    std::memcpy(header, kMagic, 4);
    put_u32(header + 4, kFormatVersion);
    put_u64(header + 8, waveforms.size());
    put_u32(header + 16, kLeads);
    put_u32(header + 20, kSamples);
    header[24] = kDtypeF32;

    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, header, kHeaderSize);
    require(std::fwrite(header, 1, kHeaderSize, f.get()) == kHeaderSize, ErrCat::io, "write failed");

    const size_t rec_bytes = size_t(kLeads) * kSamples * sizeof(float);
    for (const auto* w : waveforms) {
        // RowMajor 12x2500 is already contiguous lead-by-time
        const auto* bytes = reinterpret_cast<const unsigned char*>(w->data());
        crc = crc32(crc, bytes, static_cast<uInt>(rec_bytes));
        require(std::fwrite(bytes, 1, rec_bytes, f.get()) == rec_bytes, ErrCat::io, "write failed");
    }
    require(std::fflush(f.get()) == 0, ErrCat::io, "write failed for '" + path + "'");
    return static_cast<uint32_t>(crc);
}

uint32_t write_waveform_store(const std::vector<EcgRecord>& records, const std::string& path) {
    std::vector<const WaveformF*> ptrs;
    ptrs.reserve(records.size());
    for (const auto& r : records) ptrs.push_back(&r.waveform);
    return write_waveform_store(ptrs, path);
}

namespace {

StoreInfo parse_header(std::FILE* f, const std::string& path) {
    unsigned char header[kHeaderSize];
    require(std::fread(header, 1, kHeaderSize, f) == kHeaderSize, ErrCat::format,
            "'" + path + "': truncated header");
    require(std::memcmp(header, kMagic, 4) == 0, ErrCat::format, "'" + path + "': bad magic");
    require(get_u32(header + 4) == kFormatVersion, ErrCat::format, "'" + path + "': unsupported version");
    StoreInfo info;
    info.record_count = get_u64(header + 8);
    info.leads = get_u32(header + 16);
    info.samples = get_u32(header + 20);
    require(header[24] == kDtypeF32, ErrCat::format, "'" + path + "': unsupported dtype");
    require(info.leads == kLeads && info.samples == kSamples, ErrCat::format,
            "'" + path + "': unexpected dimensions");

    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    const long expected = static_cast<long>(kHeaderSize + info.record_count * kLeads * kSamples * sizeof(float));
    require(size == expected, ErrCat::format,
            "'" + path + "': file size " + std::to_string(size) + " does not match header (expected " +
                std::to_string(expected) + ")");
    return info;
}

}  // namespace

StoreInfo read_store_info(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, ErrCat::io, "cannot open '" + path + "'");
    return parse_header(f.get(), path);
}

uint32_t compute_store_checksum(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, ErrCat::io, "cannot open '" + path + "'");
    uLong crc = crc32(0L, Z_NULL, 0);
    unsigned char buf[1 << 16];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f.get())) > 0)
        crc = crc32(crc, buf, static_cast<uInt>(n));
    return static_cast<uint32_t>(crc);
}

StoreWriter::StoreWriter(const std::string& path, uint64_t record_count) : path_(path), expected_(record_count) {
    require(record_count > 0, ErrCat::format, "waveform store: empty record list");
    file_ = std::fopen(path.c_str(), "wb");
    require(file_ != nullptr, ErrCat::io, "cannot write '" + path + "'");

    unsigned char header[kHeaderSize] = {0};
    std::memcpy(header, kMagic, 4);
    put_u32(header + 4, kFormatVersion);
    put_u64(header + 8, record_count);
    put_u32(header + 16, kLeads);
    put_u32(header + 20, kSamples);
    header[24] = kDtypeF32;

    uLong crc = crc32(0L, Z_NULL, 0);
    crc_ = static_cast<uint32_t>(crc32(crc, header, kHeaderSize));
    require(std::fwrite(header, 1, kHeaderSize, file_) == kHeaderSize, ErrCat::io, "write failed");
}

StoreWriter::~StoreWriter() {
    if (file_) std::fclose(file_);
}

void StoreWriter::append(const WaveformF& w) {
    require(file_ && !finalized_, ErrCat::internal, "StoreWriter: append after finalize");
    require(w.rows() == kLeads && w.cols() == kSamples, ErrCat::format,
            "waveform store: expected 12x2500 waveform");
    require(written_ < expected_, ErrCat::internal, "StoreWriter: more records than declared");
    const size_t rec_bytes = size_t(kLeads) * kSamples * sizeof(float);
    const auto* bytes = reinterpret_cast<const unsigned char*>(w.data());
    crc_ = static_cast<uint32_t>(crc32(crc_, bytes, static_cast<uInt>(rec_bytes)));
    require(std::fwrite(bytes, 1, rec_bytes, file_) == rec_bytes, ErrCat::io, "write failed");
    ++written_;
}

uint32_t StoreWriter::finalize() {
    require(file_ && !finalized_, ErrCat::internal, "StoreWriter: double finalize");
    require(written_ == expected_, ErrCat::internal,
            "StoreWriter: wrote " + std::to_string(written_) + " of " + std::to_string(expected_) +
                " declared records");
    require(std::fflush(file_) == 0, ErrCat::io, "write failed for '" + path_ + "'");
    std::fclose(file_);
    file_ = nullptr;
    finalized_ = true;
    return crc_;
}

std::vector<WaveformF> read_waveform_store(const std::string& path,
                                           const std::optional<std::vector<size_t>>& indices,
                                           std::optional<uint32_t> expected_checksum) {
    if (expected_checksum) {
        const uint32_t actual = compute_store_checksum(path);
        require(actual == *expected_checksum, ErrCat::integrity,
                "'" + path + "': checksum mismatch (manifest " + std::to_string(*expected_checksum) +
                    ", store " + std::to_string(actual) + ")");
    }

    FilePtr f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, ErrCat::io, "cannot open '" + path + "'");
    const StoreInfo info = parse_header(f.get(), path);

    std::vector<size_t> order;
    if (indices) {
        order = *indices;
        for (size_t i : order)
            require(i < info.record_count, ErrCat::parameter,
                    "record index " + std::to_string(i) + " out of range");
    } else {
        order.resize(info.record_count);
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    }

    const size_t rec_bytes = size_t(kLeads) * kSamples * sizeof(float);
    std::vector<WaveformF> out;
    out.reserve(order.size());
    for (size_t i : order) {
        WaveformF w(kLeads, kSamples);
        std::fseek(f.get(), static_cast<long>(kHeaderSize + i * rec_bytes), SEEK_SET);
        require(std::fread(w.data(), 1, rec_bytes, f.get()) == rec_bytes, ErrCat::format,
                "'" + path + "': truncated record");
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace shdbench::data
