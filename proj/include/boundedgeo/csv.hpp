#pragma once

#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace boundedgeo {

// 17 significant digits: round-trips every double.
inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
    }
    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw std::logic_error("csv row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << fmt17(values[i]);
        os_ << '\n';
    }

private:
    std::ostream& os_;
    std::size_t columns_;
};

}  // namespace boundedgeo
