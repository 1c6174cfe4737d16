#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/fbm.hpp"
#include "fbsde/mixed_pde.hpp"

namespace fbsde {

// Number formatting used by every text emitter: 17 significant digits,
// locale-independent, round-trips doubles exactly.
std::string format_double(double v);

// Binary container (version 1, little-endian):
//   8-byte magic "BSDELAB1", u32 version, u32 payload kind,
//   then the payload-specific sections. Ensembles are columnar: all paths
//   at the first grid time, then the next, and so on.
void write_ensemble(const std::string& path, const FbmEnsemble& ensemble);
FbmEnsemble read_ensemble(const std::string& path);

void write_surface(const std::string& path, const PdeSolution& sol,
                   const std::string& meta_json);
PdeSolution read_surface(const std::string& path, std::string* meta_json = nullptr);

// CSV: header "path,<t0>,<t1>,..." then one row per path.
void write_ensemble_csv(const std::string& path, const FbmEnsemble& ensemble);

// Generic CSV writer: header columns then rows (all formatted 17-digit).
void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Two-column CSV (t, V) reader for clock tables; '#' lines are comments.
void read_two_column_csv(const std::string& path, std::vector<double>& a,
                         std::vector<double>& b);

// FNV-1a 64-bit digest of a file's bytes, as 16 hex characters.
std::string file_digest(const std::string& path);

}  // namespace fbsde
