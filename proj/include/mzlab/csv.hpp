#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

// CSV output with full double precision and atomic replacement.
//
// Floats are printed with "%.17g" (round-trip exact for IEEE doubles),
// so a deterministic computation produces byte-identical files. Files
// are written to <path>.tmp and renamed into place on close.

namespace mzlab {

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class csv_writer {
  public:
    csv_writer(const std::filesystem::path& path, const std::vector<std::string>& header)
        : path_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open " + tmp_.string());
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_double(values[i]);
        out_ << '\n';
    }

    // Mixed row for tables with a label column.
    void row(const std::string& label, const std::vector<double>& values) {
        out_ << label;
        for (double v : values) out_ << ',' << format_double(v);
        out_ << '\n';
    }

    void close() {
        if (closed_) return;
        out_.flush();
        if (!out_) throw std::runtime_error("write failed: " + tmp_.string());
        out_.close();
        std::filesystem::rename(tmp_, path_);
        closed_ = true;
    }

    ~csv_writer() {
        try {
            close();
        } catch (...) {
            // leave the .tmp file behind for inspection
        }
    }

  private:
    std::filesystem::path path_, tmp_;
    std::ofstream out_;
    bool closed_ = false;
};

}  // namespace mzlab
