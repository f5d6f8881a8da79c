#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "apisim/core.hpp"

namespace apisim {

struct IoError : Error {
    using Error::Error;
};

/// One parsed JSON value per non-empty line. Throws IoError on unreadable
/// files, InvalidRecord on unparsable lines (message carries the line number).
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact JSON value per line, overwriting. Creates parent
/// directories as needed.
void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& rows);

void append_jsonl(const std::filesystem::path& path, const ojson& row);

std::vector<ApiDocument> read_documents(const std::filesystem::path& path);
std::vector<PairRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   const std::vector<PairRecord>& records);

/// Catalog with doc_key -> document resolution.
class DocCatalog {
public:
    DocCatalog() = default;
    explicit DocCatalog(std::vector<ApiDocument> docs);

    static DocCatalog load(const std::filesystem::path& path);

    const ApiDocument* find(const std::string& doc_key) const;
    const ApiDocument* find(const ApiRequest& request) const;
    const std::vector<ApiDocument>& docs() const { return docs_; }
    std::size_t size() const { return docs_.size(); }

private:
    std::vector<ApiDocument> docs_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace apisim
