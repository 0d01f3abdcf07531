#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace shdbench::data {

/// Minimal .npy (format v1/v2) support: C-order little-endian f4/f8 arrays.

struct NpyInfo {
    std::vector<size_t> shape;
    bool f64 = false;       // else f32
    size_t data_offset = 0;  // bytes from file start to first element
    size_t element_count() const;
};

NpyInfo read_npy_info(const std::string& path);

/// Random access over the outermost axis without loading the whole array.
class NpyRowReader {
  public:
    explicit NpyRowReader(const std::string& path);
    ~NpyRowReader();
    NpyRowReader(const NpyRowReader&) = delete;
    NpyRowReader& operator=(const NpyRowReader&) = delete;

    const NpyInfo& info() const { return info_; }
    size_t rows() const { return info_.shape.empty() ? 0 : info_.shape[0]; }
    size_t row_elements() const { return row_elements_; }

    /// Reads outer-axis slice i into out (f8 sources are narrowed).
    void read_row(size_t i, float* out) const;

  private:
    std::FILE* file_ = nullptr;
    std::string path_;
    NpyInfo info_;
    size_t row_elements_ = 0;
};

void write_npy_f32(const std::string& path, const std::vector<size_t>& shape, const float* data);
void write_npy_f64(const std::string& path, const std::vector<size_t>& shape, const double* data);

}  // namespace shdbench::data
