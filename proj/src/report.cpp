#include "apisim/report.hpp"

#include <algorithm>
#include <sstream>

namespace apisim {

std::string ReportTable::render_text() const {
    std::vector<std::size_t> widths(columns.size(), 0);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        widths[c] = columns[c].size();
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }

    const auto emit_row = [&](std::ostringstream& out,
                              const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < widths.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            out << cell;
            if (c + 1 < widths.size()) {
                out << std::string(widths[c] - cell.size() + 2, ' ');
            }
        }
        out << '\n';
    };

    std::ostringstream out;
    if (!title.empty()) {
        out << title << '\n';
    }
    emit_row(out, columns);
    std::size_t total = 0;
    for (std::size_t c = 0; c < widths.size(); ++c) {
        total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
    }
    out << std::string(total, '-') << '\n';
    for (const auto& row : rows) {
        emit_row(out, row);
    }
    return out.str();
}

ojson ReportTable::to_json() const {
    ojson j;
    j["title"] = title;
    j["columns"] = columns;
    j["rows"] = rows;
    return j;
}

ReportTable ReportTable::from_json(const json& j) {
    if (!j.is_object() || !j.contains("columns") || !j.contains("rows")) {
        throw Error("report table JSON must carry columns and rows");
    }
    ReportTable t;
    t.title = j.value("title", std::string{});
    t.columns = j.at("columns").get<std::vector<std::string>>();
    t.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
    return t;
}

bool operator==(const ReportTable& a, const ReportTable& b) {
    return a.title == b.title && a.columns == b.columns && a.rows == b.rows;
}

std::string with_thousands(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    out.reserve(digits.size() + digits.size() / 3);
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (digits.size() - i) % 3 == 0) {
            out += ',';
        }
        out += digits[i];
    }
    return out;
}

}  // namespace apisim
