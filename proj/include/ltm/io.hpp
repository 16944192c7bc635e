#pragma once

#include <string>
#include <string_view>

#include "ltm/joint.hpp"
#include "ltm/model.hpp"

namespace ltm {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kWeightColumn = "_weight";

/// Comma-separated, header row of variable names, integer state cells,
/// empty cell = missing, optional `_weight` column. `source` prefixes error
/// messages. With `dedupe`, identical rows collapse into weighted rows.
DataSet parse_dataset_csv(std::string_view text, bool dedupe = false, const std::string& source = "data");
DataSet read_dataset_csv(const std::string& path, bool dedupe = false);
// Writes `_weight` only when some weight differs from 1.
std::string format_dataset_csv(const DataSet& data);

std::string model_to_json(const LatentTreeModel& model);
/// Schema errors name the offending field. With `strict`, a model that
/// violates any invariant is rejected; otherwise it is returned so its
/// violations can be listed.
LatentTreeModel model_from_json(std::string_view text, bool strict = true);

FeatureGroupSpec spec_from_json(std::string_view text);
std::string spec_to_json(const FeatureGroupSpec& spec);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// 64-bit FNV-1a as 16 hex digits.
std::string content_digest(std::string_view text);

}  // namespace ltm
