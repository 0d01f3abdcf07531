#include "shdbench/data/npy.hpp"

#include <cstring>
#include <memory>

#include "shdbench/common.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::data {

namespace {

constexpr char kNpyMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

NpyInfo parse_npy_header(std::FILE* f, const std::string& path) {
    unsigned char pre[8];
    require(std::fread(pre, 1, 8, f) == 8, ErrCat::format, "'" + path + "': truncated npy header");
    require(std::memcmp(pre, kNpyMagic, 6) == 0, ErrCat::format, "'" + path + "': not an npy file");
    const int major = pre[6];
    size_t header_len = 0;
    size_t pre_len = 0;
    if (major == 1) {
        unsigned char hl[2];
        require(std::fread(hl, 1, 2, f) == 2, ErrCat::format, "'" + path + "': truncated npy header");
        header_len = hl[0] | (size_t(hl[1]) << 8);
        pre_len = 10;
    } else if (major == 2) {
        unsigned char hl[4];
        require(std::fread(hl, 1, 4, f) == 4, ErrCat::format, "'" + path + "': truncated npy header");
        header_len = hl[0] | (size_t(hl[1]) << 8) | (size_t(hl[2]) << 16) | (size_t(hl[3]) << 24);
        pre_len = 12;
    } else {
        throw Error(ErrCat::format, "'" + path + "': unsupported npy version");
    }

    std::string header(header_len, '\0');
    require(std::fread(header.data(), 1, header_len, f) == header_len, ErrCat::format,
            "'" + path + "': truncated npy header");

    NpyInfo info;
    info.data_offset = pre_len + header_len;

    auto find_value = [&](const std::string& key) -> std::string {
        const auto kpos = header.find("'" + key + "'");
        require(kpos != std::string::npos, ErrCat::format,
                "'" + path + "': npy header missing '" + key + "'");
        auto p = header.find(':', kpos);
        require(p != std::string::npos, ErrCat::format, "'" + path + "': malformed npy header");
        ++p;
        while (p < header.size() && header[p] == ' ') ++p;
        return header.substr(p);
    };

    const std::string descr = find_value("descr");
    if (descr.rfind("'<f4'", 0) == 0 || descr.rfind("'|f4'", 0) == 0)
        info.f64 = false;
    else if (descr.rfind("'<f8'", 0) == 0 || descr.rfind("'|f8'", 0) == 0)
        info.f64 = true;
    else
        throw Error(ErrCat::format, "'" + path + "': unsupported npy dtype (need <f4 or <f8)");

    const std::string fortran = find_value("fortran_order");
    require(fortran.rfind("False", 0) == 0, ErrCat::format,
            "'" + path + "': fortran-order npy arrays are not supported");

    std::string shape = find_value("shape");
    require(!shape.empty() && shape[0] == '(', ErrCat::format, "'" + path + "': malformed npy shape");
    const auto close = shape.find(')');
    require(close != std::string::npos, ErrCat::format, "'" + path + "': malformed npy shape");
    for (const auto& tok : split(shape.substr(1, close - 1), ',')) {
        const std::string t = trim(tok);
        if (t.empty()) continue;
        info.shape.push_back(static_cast<size_t>(parse_int(t)));
    }
    require(!info.shape.empty(), ErrCat::format, "'" + path + "': scalar npy arrays are not supported");
    return info;
}

}  // namespace

size_t NpyInfo::element_count() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

NpyInfo read_npy_info(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, ErrCat::io, "cannot open '" + path + "'");
    return parse_npy_header(f.get(), path);
}

NpyRowReader::NpyRowReader(const std::string& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "rb");
    require(file_ != nullptr, ErrCat::io, "cannot open '" + path + "'");
    info_ = parse_npy_header(file_, path);
    row_elements_ = 1;
    for (size_t d = 1; d < info_.shape.size(); ++d) row_elements_ *= info_.shape[d];

    std::fseek(file_, 0, SEEK_END);
    const auto size = static_cast<size_t>(std::ftell(file_));
    const size_t elem = info_.f64 ? 8 : 4;
    require(size == info_.data_offset + info_.element_count() * elem, ErrCat::format,
            "'" + path + "': npy payload size does not match shape");
}

NpyRowReader::~NpyRowReader() {
    if (file_) std::fclose(file_);
}

void NpyRowReader::read_row(size_t i, float* out) const {
    require(i < rows(), ErrCat::parameter, "npy row index out of range");
    const size_t elem = info_.f64 ? 8 : 4;
    std::fseek(file_, static_cast<long>(info_.data_offset + i * row_elements_ * elem), SEEK_SET);
    if (info_.f64) {
        std::vector<double> tmp(row_elements_);
        require(std::fread(tmp.data(), 8, row_elements_, file_) == row_elements_, ErrCat::format,
                "'" + path_ + "': truncated npy payload");
        for (size_t k = 0; k < row_elements_; ++k) out[k] = static_cast<float>(tmp[k]);
    } else {
        require(std::fread(out, 4, row_elements_, file_) == row_elements_, ErrCat::format,
                "'" + path_ + "': truncated npy payload");
    }
}

namespace {

void write_npy(const std::string& path, const std::vector<size_t>& shape, const void* data,
               size_t elem_size, const char* descr) {
    std::string shape_str = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        shape_str += std::to_string(shape[i]);
        if (i + 1 < shape.size() || shape.size() == 1) shape_str += ",";
        if (i + 1 < shape.size()) shape_str += " ";
    }
    shape_str += ")";
    std::string dict =
        std::string("{'descr': '") + descr + "', 'fortran_order': False, 'shape': " + shape_str + ", }";
    // Pad so data starts at a multiple of 64 bytes.
    size_t total = 10 + dict.size() + 1;
    const size_t pad = (64 - total % 64) % 64;
    dict.append(pad, ' ');
    dict += '\n';

    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
    require(f != nullptr, ErrCat::io, "cannot write '" + path + "'");
    unsigned char pre[10];
    std::memcpy(pre, kNpyMagic, 6);
    pre[6] = 1;
    pre[7] = 0;
    pre[8] = dict.size() & 0xFF;
    pre[9] = (dict.size() >> 8) & 0xFF;
    require(std::fwrite(pre, 1, 10, f.get()) == 10, ErrCat::io, "write failed");
    require(std::fwrite(dict.data(), 1, dict.size(), f.get()) == dict.size(), ErrCat::io, "write failed");
    size_t n = 1;
    for (size_t d : shape) n *= d;
    require(std::fwrite(data, elem_size, n, f.get()) == n, ErrCat::io, "write failed");
}

}  // namespace

void write_npy_f32(const std::string& path, const std::vector<size_t>& shape, const float* data) {
    write_npy(path, shape, data, 4, "<f4");
}

void write_npy_f64(const std::string& path, const std::vector<size_t>& shape, const double* data) {
    write_npy(path, shape, data, 8, "<f8");
}

}  // namespace shdbench::data
