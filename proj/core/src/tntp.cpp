#include "marlta/tntp.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"

namespace marlta {
namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return v;
  // Some files write integral ids as "12.0".
  if (auto d = to_double(s); d && std::floor(*d) == *d && std::abs(*d) < 1e9) {
    return static_cast<int>(*d);
  }
  return std::nullopt;
}

struct Metadata {
  std::map<std::string, std::string> values;
  std::size_t lines_consumed = 0;
};

// Reads `<KEY> value` lines up to and including <END OF METADATA>.
Metadata read_metadata(std::istream& in) {
  Metadata meta;
  std::string raw;
  while (std::getline(in, raw)) {
    ++meta.lines_consumed;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '~') continue;
    if (line.front() != '<') {
      throw ParseError("expected a <KEY> metadata line before <END OF METADATA>",
                       meta.lines_consumed);
    }
    const auto close = line.find('>');
    if (close == std::string_view::npos) {
      throw ParseError("unterminated metadata key", meta.lines_consumed);
    }
    std::string key(trim(line.substr(1, close - 1)));
    if (key == "END OF METADATA") return meta;
    meta.values[key] = std::string(trim(line.substr(close + 1)));
  }
  throw ParseError("missing <END OF METADATA>", meta.lines_consumed);
}

std::optional<int> meta_int(const Metadata& meta, const std::string& key, std::size_t line) {
  auto it = meta.values.find(key);
  if (it == meta.values.end()) return std::nullopt;
  auto v = to_int(it->second);
  if (!v) throw ParseError("metadata <" + key + "> is not an integer: '" + it->second + "'", line);
  return v;
}

std::string_view strip_terminator(std::string_view line) {
  line = trim(line);
  const auto semi = line.find(';');
  if (semi != std::string_view::npos) line = line.substr(0, semi);
  return trim(line);
}

}  // namespace

Network parse_network(std::istream& in) {
  const Metadata meta = read_metadata(in);
  const std::size_t meta_line = meta.lines_consumed;
  const auto nodes = meta_int(meta, "NUMBER OF NODES", meta_line);
  const auto links_declared = meta_int(meta, "NUMBER OF LINKS", meta_line);
  if (!nodes) throw ParseError("missing <NUMBER OF NODES>", meta_line);
  if (!links_declared) throw ParseError("missing <NUMBER OF LINKS>", meta_line);
  if (*nodes < 0 || *links_declared < 0) throw ParseError("negative metadata count", meta_line);
  const int first_thru = meta_int(meta, "FIRST THRU NODE", meta_line).value_or(1);
  const int zones = meta_int(meta, "NUMBER OF ZONES", meta_line).value_or(0);

  std::vector<Link> links;
  links.reserve(static_cast<std::size_t>(*links_declared));
  std::string raw;
  std::size_t line_no = meta_line;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '~') continue;
    const auto fields = split_ws(strip_terminator(line));
    if (fields.empty()) continue;
    if (fields.size() < 5) throw ParseError("link record needs at least 5 fields", line_no);

    const auto init = to_int(fields[0]);
    const auto term = to_int(fields[1]);
    if (!init || !term) throw ParseError("link endpoints must be integers", line_no);
    if (*init < 1 || *init > *nodes || *term < 1 || *term > *nodes) {
      throw StructuralError("line " + std::to_string(line_no) + ": link (" +
                            std::to_string(*init) + ", " + std::to_string(*term) +
                            ") references a node beyond <NUMBER OF NODES> = " +
                            std::to_string(*nodes));
    }
    std::vector<double> num;
    for (std::size_t k = 2; k < fields.size() && k < 7; ++k) {
      auto v = to_double(fields[k]);
      if (!v) {
        throw ParseError("non-numeric link field '" + std::string(fields[k]) + "'", line_no);
      }
      num.push_back(*v);
    }
    Link l;
    l.tail = *init - 1;
    l.head = *term - 1;
    l.capacity = num[0];
    l.length = num[1];
    l.free_flow_time = num[2];
    l.b = num.size() > 3 && num[3] != 0.0 ? num[3] : kDefaultBprB;
    l.power = num.size() > 4 && num[4] != 0.0 ? num[4] : kDefaultBprPower;
    if (!(l.capacity > 0.0)) {
      throw ValidationError("line " + std::to_string(line_no) + ": capacity must be positive");
    }
    links.push_back(l);
  }
  if (static_cast<int>(links.size()) != *links_declared) {
    throw StructuralError("<NUMBER OF LINKS> declares " + std::to_string(*links_declared) +
                          " links, file contains " + std::to_string(links.size()));
  }
  return Network(*nodes, std::move(links), {}, std::max(0, first_thru - 1), zones);
}

Network parse_network(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_network(in);
}

TripTable parse_trips(std::istream& in, const Network* net) {
  const Metadata meta = read_metadata(in);
  TripTable table;
  table.zone_count = meta_int(meta, "NUMBER OF ZONES", meta.lines_consumed).value_or(0);
  if (auto it = meta.values.find("TOTAL OD FLOW"); it != meta.values.end()) {
    auto v = to_double(it->second);
    if (!v) throw ParseError("<TOTAL OD FLOW> is not a number", meta.lines_consumed);
    table.total_od_flow = v;
  }

  auto to_index = [&](int id, std::size_t line_no) {
    if (net) {
      auto idx = net->index_of(id);
      if (!idx) {
        throw StructuralError("line " + std::to_string(line_no) + ": node " + std::to_string(id) +
                              " is not in the network");
      }
      return *idx;
    }
    if (id < 1) throw ParseError("node ids must be positive", line_no);
    return id - 1;
  };

  std::vector<OdPair> entries;
  std::optional<int> origin;
  std::string raw;
  std::size_t line_no = meta.lines_consumed;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '~') continue;
    if (line.starts_with("Origin") || line.starts_with("origin")) {
      auto id = to_int(line.substr(6));
      if (!id) throw ParseError("malformed Origin line", line_no);
      origin = to_index(*id, line_no);
      continue;
    }
    while (!line.empty()) {
      const auto semi = line.find(';');
      std::string_view entry = trim(line.substr(0, semi));
      line = semi == std::string_view::npos ? std::string_view{} : trim(line.substr(semi + 1));
      if (entry.empty()) continue;
      const auto colon = entry.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("expected 'destination : flow' entry", line_no);
      }
      if (!origin) throw ParseError("destination entry before any Origin line", line_no);
      const auto dest_id = to_int(entry.substr(0, colon));
      const auto flow = to_double(entry.substr(colon + 1));
      if (!dest_id || !flow) throw ParseError("malformed 'destination : flow' entry", line_no);
      if (*flow < 0.0 || !std::isfinite(*flow)) {
        throw ValidationError("line " + std::to_string(line_no) + ": negative or invalid flow");
      }
      if (*flow == 0.0) continue;
      const int dest = to_index(*dest_id, line_no);
      if (dest == *origin) {
        throw StructuralError("line " + std::to_string(line_no) +
                              ": positive intrazonal demand cannot be routed");
      }
      entries.push_back({*origin, dest, *flow});
    }
  }
  table.demand = DemandMatrix(std::move(entries));
  return table;
}

TripTable parse_trips(std::string_view text, const Network* net) {
  std::istringstream in{std::string(text)};
  return parse_trips(in, net);
}

NodeCoords parse_node_coords(std::istream& in) {
  NodeCoords coords;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '~' || line.front() == '<') continue;
    const auto fields = split_ws(strip_terminator(line));
    if (fields.empty()) continue;
    const auto id = to_int(fields[0]);
    if (!id) {
      // Column header such as "node X Y ;".
      if (!seen_data) continue;
      throw ParseError("node id must be an integer", line_no);
    }
    seen_data = true;
    if (fields.size() < 3) throw ParseError("node line needs id, x and y", line_no);
    const auto x = to_double(fields[1]);
    const auto y = to_double(fields[2]);
    if (!x || !y) throw ParseError("non-numeric coordinate", line_no);
    coords[*id] = Coordinate{*x, *y};
  }
  return coords;
}

NodeCoords parse_node_coords(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_node_coords(in);
}

void validate_coords(const NodeCoords& coords, const Network& net) {
  for (const auto& [id, c] : coords) {
    if (!net.index_of(id)) {
      throw ValidationError("coordinates given for unknown node " + std::to_string(id));
    }
  }
}

bool covers_network(const NodeCoords& coords, const Network& net) {
  for (int v = 0; v < net.node_count(); ++v) {
    if (!coords.contains(net.original_id(v))) return false;
  }
  return true;
}

std::string write_network(const Network& net) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << net.zone_count() << '\n'
      << "<NUMBER OF NODES> " << net.node_count() << '\n'
      << "<FIRST THRU NODE> " << net.first_thru_node() + 1 << '\n'
      << "<NUMBER OF LINKS> " << net.link_count() << '\n'
      << "<END OF METADATA>\n\n\n"
      << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  for (const Link& l : net.links()) {
    out << '\t' << net.original_id(l.tail) << '\t' << net.original_id(l.head) << '\t'
        << format_double(l.capacity) << '\t' << format_double(l.length) << '\t'
        << format_double(l.free_flow_time) << '\t' << format_double(l.b) << '\t'
        << format_double(l.power) << "\t0\t0\t1\t;\n";
  }
  return out.str();
}

std::string write_trips(const DemandMatrix& dm, const Network& net) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << net.zone_count() << '\n'
      << "<TOTAL OD FLOW> " << format_double(dm.total()) << '\n'
      << "<END OF METADATA>\n\n";
  std::optional<int> current;
  for (const OdPair& od : dm.entries()) {
    if (!current || *current != od.origin) {
      if (current) out << "\n\n";
      out << "Origin \t" << net.original_id(od.origin) << '\n';
      current = od.origin;
    }
    out << "    " << net.original_id(od.destination) << " : " << format_double(od.demand) << ";";
  }
  if (current) out << '\n';
  return out.str();
}

std::string write_node_coords(const NodeCoords& coords) {
  std::ostringstream out;
  out << "node\tX\tY\t;\n";
  for (const auto& [id, c] : coords) {
    out << id << '\t' << format_double(c.x) << '\t' << format_double(c.y) << "\t;\n";
  }
  return out.str();
}

Network load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file '" + path + "'");
  return parse_network(in);
}

TripTable load_trips_file(const std::string& path, const Network* net) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trips file '" + path + "'");
  return parse_trips(in, net);
}

NodeCoords load_node_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open node file '" + path + "'");
  return parse_node_coords(in);
}

}  // namespace marlta
