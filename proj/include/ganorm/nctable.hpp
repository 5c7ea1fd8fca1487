#pragma once

#include <string>
#include <vector>

#include "ganorm/graphmetrics.hpp"
#include "ganorm/montage.hpp"

namespace ganorm {

/// One subject/band row of the network-characteristics table.
struct NCRow {
    std::string subject_id;
    BandName band = BandName::alpha;
    double age = 0.0;
    NCVector ncs;
};

using NCTable = std::vector<NCRow>;

/// Columns: subject_id,band,age,cpl,ge,cc,le,m,bc,pc
void save_nctable_csv(const NCTable& table, const std::string& path);
NCTable load_nctable_csv(const std::string& path);

}  // namespace ganorm
