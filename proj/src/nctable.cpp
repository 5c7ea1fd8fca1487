#include "ganorm/nctable.hpp"

#include <fstream>
#include <sstream>

#include "ganorm/common.hpp"

namespace ganorm {

void save_nctable_csv(const NCTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "subject_id,band,age,cpl,ge,cc,le,m,bc,pc\n";
    for (const auto& row : table) {
        if (row.subject_id.find(',') != std::string::npos)
            throw Error("subject id contains a comma: " + row.subject_id);
        out << row.subject_id << ',' << band_name_str(row.band) << ',' << dtos(row.age);
        for (double v : row.ncs.values()) out << ',' << dtos(v);
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

NCTable load_nctable_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty table: " + path);
    if (line != "subject_id,band,age,cpl,ge,cc,le,m,bc,pc")
        throw Error("unexpected header in " + path + ": " + line);
    NCTable table;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 10)
            throw Error(path + ":" + std::to_string(lineno) + ": expected 10 columns, got " +
                        std::to_string(cells.size()));
        NCRow row;
        row.subject_id = cells[0];
        row.band = band_name_from_str(cells[1]);
        row.age = std::stod(cells[2]);
        row.ncs.cpl = std::stod(cells[3]);
        row.ncs.ge = std::stod(cells[4]);
        row.ncs.cc = std::stod(cells[5]);
        row.ncs.le = std::stod(cells[6]);
        row.ncs.m = std::stod(cells[7]);
        row.ncs.bc = std::stod(cells[8]);
        row.ncs.pc = std::stod(cells[9]);
        table.push_back(std::move(row));
    }
    return table;
}

}  // namespace ganorm
