#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/grid.hpp"

namespace gridflow {

enum class SourceFormat { MatpowerM, Json };

struct CaseDocument {
    SourceFormat source_format = SourceFormat::Json;
    Grid grid;
    std::vector<std::string> warnings;
};

enum class ViolationKind {
    NoSlack,
    MultipleSlack,
    SlackWithoutGenerator,
    SelfLoop,
    ZeroReactance,
    NegativeResistance,
    DuplicateBusId,
    DanglingBranch,
    DanglingGenerator,
    InvertedGeneratorLimits,
    NonPositiveVoltage,
    Islanded,
    NonPositiveBase,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string detail;
};

/// Structural checks; an empty result means the grid can be solved.
std::vector<Violation> validate(Grid const& grid);

/// Throws the Error matching the first violation, if any.
void validate_or_throw(Grid const& grid);

/// Parses a MATPOWER case function (matrix literals only). Powers are
/// converted to per-unit on baseMVA and angles to radians. Throws
/// Error(SyntaxError) with a line:column position, Error(MissingTable),
/// Error(BadBusType) or Error(NoSlack).
CaseDocument parse_matpower(std::string_view text, std::string_view fallback_name = "case");

/// Parses the canonical JSON schema. Throws Error(SchemaError) naming the
/// JSON path of the offending field, e.g. "$.buses[3].Pd".
CaseDocument parse_json(std::string_view text);

std::string write_json(Grid const& grid);

/// Reads a `.m` or `.json` case from disk.
CaseDocument load_case(std::filesystem::path const& path);

std::string read_text_file(std::filesystem::path const& path);

/// Writes via a temporary file and rename so readers never see a partial file.
void write_text_file_atomic(std::filesystem::path const& path, std::string_view content);

}  // namespace gridflow
