#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dcsim/experiment.hpp"

namespace dcsim {

using ojson = nlohmann::ordered_json;

struct ArchiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ojson to_json(const TransportParams& p);
ojson to_json(const ExperimentConfig& c);
ojson to_json(const ExperimentSummary& s);
ojson to_json(const Snapshot& s);

TransportParams transport_from_json(const ojson& j);
ExperimentConfig config_from_json(const ojson& j);
ExperimentSummary summary_from_json(const ojson& j);
Snapshot snapshot_from_json(const ojson& j);

/// Three JSON lines: config, summary, snapshots. Each carries the schema
/// version; field order is fixed so equal results give equal bytes.
std::string serialize_archive(const ExperimentResult& r);

/// Throws ArchiveError on malformed input or a schema version other than
/// kSchemaVersion.
ExperimentResult parse_archive(std::string_view text);

/// gzip-compressed serialize_archive, written to a temporary sibling and
/// renamed into place.
void write_archive(const std::filesystem::path& path, const ExperimentResult& r);
ExperimentResult read_archive(const std::filesystem::path& path);

/// In-memory gzip (RFC 1952 framing, zero mtime).
std::string gzip_compress(std::string_view data);
std::string gzip_decompress(std::string_view data);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace dcsim
