#pragma once

#include <string>
#include <vector>

#include "apisim/core.hpp"

namespace apisim {

/// Small tabular report rendered both as aligned text and as JSON.
struct ReportTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    /// Aligned fixed-width text; every row padded to its column width.
    std::string render_text() const;

    ojson to_json() const;
    static ReportTable from_json(const json& j);
};

bool operator==(const ReportTable& a, const ReportTable& b);

/// Formats n with thousands separators ("95272" -> "95,272").
std::string with_thousands(std::size_t n);

}  // namespace apisim
