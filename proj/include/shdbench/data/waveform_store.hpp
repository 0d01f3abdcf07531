#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::data {

// Binary store, little-endian.
// Header: magic "ECGW", version u32=1, record count u64, leads u32=12,
// samples u32=2500, dtype u8=1 (float32), 7 reserved bytes. Body: row-major
// lead-by-time float32 per record, in manifest order.

struct StoreInfo {
    uint64_t record_count = 0;
    uint32_t leads = 0;
    uint32_t samples = 0;
};

/// Writes waveforms in order; returns the CRC32 of the full file.
uint32_t write_waveform_store(const std::vector<const WaveformF*>& waveforms, const std::string& path);
uint32_t write_waveform_store(const std::vector<EcgRecord>& records, const std::string& path);

StoreInfo read_store_info(const std::string& path);

/// Reads all records, or the requested subset, in the given order.
/// If expected_checksum is set the full-file CRC32 is verified first.
std::vector<WaveformF> read_waveform_store(const std::string& path,
                                           const std::optional<std::vector<size_t>>& indices = std::nullopt,
                                           std::optional<uint32_t> expected_checksum = std::nullopt);

uint32_t compute_store_checksum(const std::string& path);

/// Streaming writer for cohorts too large to hold in memory. The record
/// count is fixed at open so the header (and thus the CRC) is final from the
/// first byte; finalize() fails unless exactly that many records were appended.
class StoreWriter {
  public:
    StoreWriter(const std::string& path, uint64_t record_count);
    ~StoreWriter();
    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;

    void append(const WaveformF& w);
    uint32_t finalize();

  private:
    std::FILE* file_ = nullptr;
    std::string path_;
    uint64_t expected_ = 0;
    uint64_t written_ = 0;
    uint32_t crc_ = 0;
    bool finalized_ = false;
};

}  // namespace shdbench::data
