#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rarepop/sampler.hpp"

// Chain artifacts: a scalar-draw CSV, a long-format component CSV, and an
// acceptance-rate summary JSON. Doubles are printed with %.17g so a written
// file parses back to the exact same values.

namespace rarepop {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_chain_csv(std::ostream& out, const Chain& chain) {
    out << "iter,alpha,beta,nu,x_unobs,r_unobs,T\n";
    for (const auto& d : chain.draws) {
        out << d.iter << ',' << format_double(d.alpha) << ',' << format_double(d.beta) << ','
            << format_double(d.nu) << ',' << d.x_unobs << ',' << d.r_unobs << ',' << d.total
            << '\n';
    }
}

inline void write_components_csv(std::ostream& out, const Chain& chain) {
    out << "iter,component_label,observed_flag,lambda\n";
    for (const auto& d : chain.draws)
        for (const auto& c : d.components)
            out << d.iter << ',' << c.label << ',' << (c.observed ? 1 : 0) << ','
                << format_double(c.lambda) << '\n';
}

inline nlohmann::json acceptance_json(const Chain& chain) {
    nlohmann::json j;
    for (const auto& [name, mv] : chain.moves) {
        j[name] = {{"proposed", mv.proposed},
                   {"accepted", mv.accepted},
                   {"rate", mv.rate()}};
    }
    return j;
}

struct LoadedChain {
    std::vector<long> iter;
    std::vector<double> alpha, beta, nu;
    std::vector<long> x_unobs, r_unobs;
    std::vector<double> total;

    std::size_t size() const { return iter.size(); }
};

struct LoadedComponents {
    std::vector<long> iter;
    std::vector<long> label;
    std::vector<int> observed;
    std::vector<double> lambda;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline LoadedChain read_chain_csv(std::istream& in, const std::string& name = "<chain>") {
    LoadedChain c;
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line).size() != 7)
        throw std::runtime_error(name + ": missing or malformed chain header");
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 7)
            throw std::runtime_error(name + ":" + std::to_string(line_no) + ": expected 7 fields");
        c.iter.push_back(std::stol(f[0]));
        c.alpha.push_back(std::stod(f[1]));
        c.beta.push_back(std::stod(f[2]));
        c.nu.push_back(std::stod(f[3]));
        c.x_unobs.push_back(std::stol(f[4]));
        c.r_unobs.push_back(std::stol(f[5]));
        c.total.push_back(std::stod(f[6]));
    }
    return c;
}

inline LoadedComponents read_components_csv(std::istream& in, const std::string& name = "<components>") {
    LoadedComponents c;
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line).size() != 4)
        throw std::runtime_error(name + ": missing or malformed components header");
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 4)
            throw std::runtime_error(name + ":" + std::to_string(line_no) + ": expected 4 fields");
        c.iter.push_back(std::stol(f[0]));
        c.label.push_back(std::stol(f[1]));
        c.observed.push_back(std::stoi(f[2]));
        c.lambda.push_back(std::stod(f[3]));
    }
    return c;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << contents;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rarepop
