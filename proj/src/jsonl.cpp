#include "apisim/jsonl.hpp"

#include <fstream>

namespace apisim {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw InvalidRecord(path.string() + ":" + std::to_string(lineno) + ": " +
                                e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& rows) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& row : rows) {
        out << row.dump() << '\n';
    }
}

void append_jsonl(const std::filesystem::path& path, const ojson& row) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError("cannot append to " + path.string());
    }
    out << row.dump() << '\n';
}

std::vector<ApiDocument> read_documents(const std::filesystem::path& path) {
    std::vector<ApiDocument> docs;
    for (const auto& row : read_jsonl(path)) {
        docs.push_back(document_from_json(row));
    }
    return docs;
}

std::vector<PairRecord> read_records(const std::filesystem::path& path) {
    std::vector<PairRecord> records;
    for (const auto& row : read_jsonl(path)) {
        records.push_back(record_from_json(row));
    }
    return records;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<PairRecord>& records) {
    std::vector<ojson> rows;
    rows.reserve(records.size());
    for (const auto& record : records) {
        rows.push_back(to_json(record));
    }
    write_jsonl(path, rows);
}

DocCatalog::DocCatalog(std::vector<ApiDocument> docs) : docs_(std::move(docs)) {
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        index_.emplace(docs_[i].key(), i);
    }
}

DocCatalog DocCatalog::load(const std::filesystem::path& path) {
    return DocCatalog(read_documents(path));
}

const ApiDocument* DocCatalog::find(const std::string& doc_key) const {
    auto it = index_.find(doc_key);
    return it == index_.end() ? nullptr : &docs_[it->second];
}

const ApiDocument* DocCatalog::find(const ApiRequest& request) const {
    return find(make_doc_key(request.category, request.tool_name, request.api_name));
}

}  // namespace apisim
