#pragma once

// Field dump/load: CSV `x1,...,xn,value` plus a JSON sidecar holding the mesh
// parameters. Doubles are written with 17 significant digits so a round trip
// is bit-exact.

#include <filesystem>
#include <string>

#include "qsym/domain.hpp"

namespace qsym {

/// Writes `<stem>.csv` and `<stem>.mesh.json`.
void save_field(const ScalarField& u, const std::filesystem::path& stem);
ScalarField load_field(const std::filesystem::path& stem);

/// Shortest round-trippable decimal form used in every artifact.
std::string format_double(double v);

}  // namespace qsym
