#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

/// Shortest-exact text for a double: %.17g, with inf / -inf / nan spelled out.
std::string format_number(double x);
std::string format_index(std::span<const int> multi);  // "3;4"

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    void write(const std::filesystem::path& path) const;
    /// Column position by name, or -1.
    int column(const std::string& name) const;
};

/// Reads a comma-separated file with a header line. Rejects empty files,
/// missing headers and ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

/// manifest.json listing each output file with its size and SHA-256.
void write_manifest(const std::filesystem::path& dir, const std::string& experiment, const std::string& config_json,
                    const std::vector<std::filesystem::path>& files);

enum class PlotKind { Decay, Envelope };

struct PlotSummary {
    int points = 0;
    double rate = 0.0;  // decay plots: fitted exponential rate
};

/// Static SVG from a decay CSV (distance, norm columns) or a smoothing CSV
/// (t, norm_AV, norm_0V, envelope columns).
PlotSummary emit_plot(const std::filesystem::path& csv, PlotKind kind, const std::filesystem::path& svg);

}  // namespace ctlab
