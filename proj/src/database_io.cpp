#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "relbn/database.hpp"

namespace relbn {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    out.push_back(trim(s.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

std::vector<std::string> parse_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw LoadError(where + ": unterminated quoted field");
  fields.push_back(was_quoted ? field : trim(field));
  return fields;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string() + ": cannot open file");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    auto fields = parse_csv_line(line, where);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw LoadError(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f == kBottomToken || f == kStarToken) throw LoadError(where + ": reserved token '" + f + "' in data");
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

std::size_t column_index(const CsvTable& t, const std::string& name, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return i;
  }
  throw LoadError(path.string() + ":1: missing column '" + name + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Decodes one attribute column, binning numeric columns where declared.
std::vector<Value> decode_column(const CsvTable& t, std::size_t col, const AttributeDecl& attr,
                                 const std::filesystem::path& path) {
  std::vector<Value> out(t.rows.size());
  if (attr.bins > 0) {
    std::vector<double> numbers(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& cell = t.rows[r][col];
      double v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw LoadError(path.string() + ":" + std::to_string(t.line_numbers[r]) + ": '" + cell +
                        "' is not numeric (column " + attr.name + " is binned)");
      }
      numbers[r] = v;
    }
    if (numbers.empty()) return out;
    try {
      auto bins = discretize_indices(numbers, attr.bins);
      for (std::size_t r = 0; r < bins.size(); ++r) out[r] = bins[r];
    } catch (const std::invalid_argument& e) {
      throw LoadError(path.string() + ": column " + attr.name + ": " + e.what());
    }
    return out;
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cell = t.rows[r][col];
    auto it = std::find(attr.domain.begin(), attr.domain.end(), cell);
    if (it == attr.domain.end()) {
      throw LoadError(path.string() + ":" + std::to_string(t.line_numbers[r]) + ": value '" + cell +
                      "' outside the declared domain of " + attr.name);
    }
    out[r] = static_cast<Value>(it - attr.domain.begin());
  }
  return out;
}

std::string default_key(const EntityType& e) {
  if (!e.key_column.empty()) return e.key_column;
  std::string k = e.name + "_id";
  for (auto& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return k;
}

}  // namespace

Schema parse_schema(std::string_view text, const std::string& origin) {
  Schema schema;
  enum class Section { None, Entity, Relationship } section = Section::None;
  std::vector<EntityType> entities;
  std::vector<RelationshipDecl> rels;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) { throw LoadError(origin + ":" + std::to_string(line_no) + ": " + msg); };
  auto parse_attr = [&](const std::string& name, const std::string& value, bool binned) {
    AttributeDecl a;
    a.name = name;
    if (binned) {
      int bins = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), bins);
      if (ec != std::errc() || ptr != value.data() + value.size() || bins < 1) fail("bin count must be a positive integer");
      a.bins = bins;
    } else {
      a.domain = split_list(value);
    }
    return a;
  };
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      std::istringstream hs(line.substr(1, line.size() - 2));
      std::string kind, name, extra;
      hs >> kind >> name;
      if (name.empty() || (hs >> extra)) fail("section header must be [entity Name] or [relationship Name]");
      if (kind == "entity") {
        section = Section::Entity;
        entities.push_back(EntityType{name, "", "", "", {}});
      } else if (kind == "relationship") {
        section = Section::Relationship;
        rels.push_back(RelationshipDecl{name, {}, "", {}, {}, {}, {}});
      } else {
        fail("unknown section kind '" + kind + "'");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::istringstream ks(key);
    std::string word, arg, extra;
    ks >> word >> arg;
    if (ks >> extra) fail("malformed key '" + key + "'");
    if (section == Section::None) fail("key outside of a section");
    {
      if (section == Section::Entity) {
        auto& e = entities.back();
        if (word == "file" && arg.empty()) e.file = value;
        else if (word == "key" && arg.empty()) e.key_column = value;
        else if (word == "variable" && arg.empty()) e.variable = value;
        else if (word == "attribute" && !arg.empty()) e.attributes.push_back(parse_attr(arg, value, false));
        else if (word == "binned" && !arg.empty()) e.attributes.push_back(parse_attr(arg, value, true));
        else fail("unknown entity key '" + key + "'");
      } else {
        auto& r = rels.back();
        if (word == "file" && arg.empty()) r.file = value;
        else if (word == "alias" && arg.empty()) r.aliases.push_back(value);
        else if (word == "argument" && !arg.empty()) {
          r.key_columns.push_back(arg);
          r.argument_type_names.push_back(value);
        } else if (word == "attribute" && !arg.empty()) r.attributes.push_back(parse_attr(arg, value, false));
        else if (word == "binned" && !arg.empty()) r.attributes.push_back(parse_attr(arg, value, true));
        else fail("unknown relationship key '" + key + "'");
      }
    }
  }
  for (auto& e : entities) schema.add_entity_type(std::move(e));
  for (auto& r : rels) schema.add_relationship(std::move(r));
  try {
    schema.finalize();
  } catch (const SchemaError& e) {
    throw LoadError(origin + ": " + e.what());
  }
  return schema;
}

DatabaseInstance load_database(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError(manifest_path.string() + ": cannot open manifest");
  std::stringstream buf;
  buf << in.rdbuf();
  Schema schema = parse_schema(buf.str(), manifest_path.string());
  const auto base = manifest_path.parent_path();

  DatabaseInstance db(schema);
  const auto& s = db.schema();
  for (std::size_t e = 0; e < s.entity_types().size(); ++e) {
    const auto& decl = s.entity_types()[e];
    if (decl.file.empty()) throw LoadError(manifest_path.string() + ": entity " + decl.name + " has no file");
    const auto path = base / decl.file;
    auto table = read_csv(path);
    const auto key_col = column_index(table, default_key(decl), path);
    std::vector<std::vector<Value>> columns;
    for (const auto& attr : decl.attributes) {
      columns.push_back(decode_column(table, column_index(table, attr.name, path), attr, path));
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& name = table.rows[r][key_col];
      const auto where = path.string() + ":" + std::to_string(table.line_numbers[r]);
      if (name.empty()) throw LoadError(where + ": empty key");
      if (db.find_constant(e, name)) throw LoadError(where + ": duplicate " + decl.name + " key '" + name + "'");
      std::vector<Value> values;
      for (const auto& col : columns) values.push_back(col[r]);
      db.add_entity(e, name, std::move(values));
    }
  }
  for (std::size_t ri = 0; ri < s.relationships().size(); ++ri) {
    const auto& decl = s.relationships()[ri];
    if (decl.file.empty()) throw LoadError(manifest_path.string() + ": relationship " + decl.name + " has no file");
    const auto path = base / decl.file;
    auto table = read_csv(path);
    std::vector<std::size_t> key_cols;
    for (const auto& k : decl.key_columns) key_cols.push_back(column_index(table, k, path));
    std::vector<std::vector<Value>> columns;
    for (const auto& attr : decl.attributes) {
      columns.push_back(decode_column(table, column_index(table, attr.name, path), attr, path));
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto where = path.string() + ":" + std::to_string(table.line_numbers[r]);
      std::vector<ConstantId> args;
      for (std::size_t i = 0; i < key_cols.size(); ++i) {
        const auto type = decl.argument_types[i];
        const auto& name = table.rows[r][key_cols[i]];
        auto c = db.find_constant(type, name);
        if (!c) {
          throw LoadError(where + ": foreign key '" + name + "' does not name a " + s.entity_types()[type].name);
        }
        args.push_back(*c);
      }
      if (db.find_tuple(ri, args)) throw LoadError(where + ": duplicate " + decl.name + " tuple");
      std::vector<Value> values;
      for (const auto& col : columns) values.push_back(col[r]);
      db.add_tuple(ri, std::move(args), std::move(values));
    }
  }
  db.validate();
  return db;
}

std::string schema_to_manifest(const Schema& schema, bool with_files) {
  std::ostringstream out;
  auto attrs = [&](const std::vector<AttributeDecl>& list) {
    for (const auto& a : list) {
      out << "attribute " << a.name << " = ";
      for (std::size_t i = 0; i < a.domain.size(); ++i) out << (i ? "," : "") << a.domain[i];
      out << "\n";
    }
  };
  bool first = true;
  for (const auto& e : schema.entity_types()) {
    if (!first) out << "\n";
    first = false;
    out << "[entity " << e.name << "]\n";
    if (with_files) out << "file = " << e.name << ".csv\n";
    out << "key = " << default_key(e) << "\n";
    out << "variable = " << e.variable << "\n";
    attrs(e.attributes);
  }
  for (const auto& r : schema.relationships()) {
    out << "\n[relationship " << r.name << "]\n";
    if (with_files) out << "file = " << r.name << ".csv\n";
    for (const auto& a : r.aliases) out << "alias = " << a << "\n";
    for (std::size_t i = 0; i < r.argument_types.size(); ++i) {
      const auto key = i < r.key_columns.size() ? r.key_columns[i]
                                                : default_key(schema.entity_types()[r.argument_types[i]]);
      out << "argument " << key << " = " << schema.entity_types()[r.argument_types[i]].name << "\n";
    }
    attrs(r.attributes);
  }
  return out.str();
}

std::filesystem::path write_database(const DatabaseInstance& db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& s = db.schema();
  const auto manifest = dir / "database.manifest";
  {
    std::ofstream out(manifest);
    out << "# relbn database manifest\n" << schema_to_manifest(s, true);
    if (!out) throw LoadError(manifest.string() + ": write failed");
  }
  for (std::size_t e = 0; e < s.entity_types().size(); ++e) {
    const auto& decl = s.entity_types()[e];
    std::ofstream out(dir / (decl.name + ".csv"));
    out << csv_field(default_key(decl));
    for (const auto& a : decl.attributes) out << "," << csv_field(a.name);
    out << "\n";
    for (std::size_t c = 0; c < db.entity_count(e); ++c) {
      out << csv_field(db.constant_name(e, static_cast<ConstantId>(c)));
      for (std::size_t a = 0; a < decl.attributes.size(); ++a) {
        out << "," << decl.attributes[a].domain[static_cast<std::size_t>(db.entity_value(e, a, static_cast<ConstantId>(c)))];
      }
      out << "\n";
    }
  }
  for (std::size_t r = 0; r < s.relationships().size(); ++r) {
    const auto& decl = s.relationships()[r];
    std::ofstream out(dir / (decl.name + ".csv"));
    for (std::size_t i = 0; i < decl.argument_types.size(); ++i) {
      const auto key = i < decl.key_columns.size() ? decl.key_columns[i]
                                                   : default_key(s.entity_types()[decl.argument_types[i]]);
      out << (i ? "," : "") << csv_field(key);
    }
    for (const auto& a : decl.attributes) out << "," << csv_field(a.name);
    out << "\n";
    for (std::size_t row = 0; row < db.tuple_count(r); ++row) {
      auto args = db.tuple(r, row);
      for (std::size_t i = 0; i < args.size(); ++i) {
        out << (i ? "," : "") << csv_field(db.constant_name(decl.argument_types[i], args[i]));
      }
      for (std::size_t a = 0; a < decl.attributes.size(); ++a) {
        out << "," << decl.attributes[a].domain[static_cast<std::size_t>(db.tuple_value(r, a, row))];
      }
      out << "\n";
    }
  }
  return manifest;
}

}  // namespace relbn
