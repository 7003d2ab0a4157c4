#include "sgp/kernel_json.hpp"

#include <fstream>
#include <sstream>

#include "sgp/errors.hpp"

namespace sgp {

namespace {

using nlohmann::json;

json param_to_json(const ParamRef& p) {
  if (p.is_slot()) return p.slot;
  return p.fixed;
}

ParamRef param_from_json(const json& j, const char* what) {
  if (j.is_string()) return ParamRef(j.get<std::string>());
  if (j.is_number()) return ParamRef(j.get<double>());
  throw ConfigError(std::string("kernel json: ") + what +
                    " must be a slot name or a number");
}

const char* field_kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::kConstant: return "constant";
    case FieldKind::kAxisLinear: return "axis_linear";
    case FieldKind::kRadialExpansion: return "radial_expansion";
  }
  return "?";
}

FieldKind field_kind_from(const std::string& s) {
  if (s == "constant") return FieldKind::kConstant;
  if (s == "axis_linear") return FieldKind::kAxisLinear;
  if (s == "radial_expansion") return FieldKind::kRadialExpansion;
  throw ConfigError("kernel json: unknown field kind '" + s + "'");
}

json field_to_json(const ParametricField& f) {
  json j;
  j["kind"] = field_kind_name(f.kind);
  j["params"] = f.params;
  if (!f.center.empty()) j["center"] = f.center;
  return j;
}

ParametricField field_from_json(const json& j) {
  ParametricField f;
  f.kind = field_kind_from(j.at("kind").get<std::string>());
  f.params = j.at("params").get<std::vector<std::string>>();
  if (j.contains("center")) f.center = j.at("center").get<std::vector<double>>();
  return f;
}

json form_to_json(WendlandForm form) {
  return form == WendlandForm::kClassical ? "classical" : "default";
}

WendlandForm form_from_json(const json& j) {
  if (!j.is_string()) throw ConfigError("kernel json: form must be a string");
  const auto s = j.get<std::string>();
  if (s == "classical") return WendlandForm::kClassical;
  if (s == "default") return WendlandForm::kDefault;
  throw ConfigError("kernel json: unknown wendland form '" + s + "'");
}

json bump_groups_to_json(const std::vector<BumpGroupSpec>& groups) {
  json out = json::array();
  for (const auto& group : groups) {
    json bumps = json::array();
    for (const auto& bump : group.bumps) {
      json b;
      json center = json::array();
      for (const auto& c : bump.center) center.push_back(param_to_json(c));
      b["center"] = center;
      b["amplitude"] = param_to_json(bump.amplitude);
      b["shape"] = param_to_json(bump.shape);
      b["radius"] = param_to_json(bump.radius);
      bumps.push_back(std::move(b));
    }
    out.push_back(json{{"bumps", std::move(bumps)}});
  }
  return out;
}

std::vector<BumpGroupSpec> bump_groups_from_json(const json& j) {
  std::vector<BumpGroupSpec> groups;
  for (const auto& jg : j) {
    BumpGroupSpec group;
    for (const auto& jb : jg.at("bumps")) {
      BumpSpec bump;
      for (const auto& jc : jb.at("center"))
        bump.center.push_back(param_from_json(jc, "bump center"));
      bump.amplitude = param_from_json(jb.at("amplitude"), "bump amplitude");
      bump.shape = param_from_json(jb.at("shape"), "bump shape");
      bump.radius = param_from_json(jb.at("radius"), "bump radius");
      group.bumps.push_back(std::move(bump));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

struct SpecToJson {
  json operator()(const WendlandNode& n) const {
    json j{{"kind", "wendland"},
           {"support_radius", param_to_json(n.support_radius)}};
    if (n.form != WendlandForm::kDefault) j["form"] = form_to_json(n.form);
    return j;
  }
  json operator()(const Matern32Node& n) const {
    return json{{"kind", "matern32"},
                {"length", param_to_json(n.length)},
                {"sigma", param_to_json(n.sigma)}};
  }
  json operator()(const NonstatWendlandNode& n) const {
    json j{{"kind", "nonstat_wendland"},
           {"signal_field", field_to_json(n.signal_field)},
           {"length_field", field_to_json(n.length_field)},
           {"support_radius", param_to_json(n.support_radius)}};
    if (n.form != WendlandForm::kDefault) j["form"] = form_to_json(n.form);
    return j;
  }
  json operator()(const BumpFarfieldNode& n) const {
    return json{{"kind", "bump_farfield"},
                {"groups", bump_groups_to_json(n.groups)}};
  }
  json operator()(const DeltaFarfieldNode& n) const {
    json j{{"kind", "delta_farfield"}};
    if (n.groups.radius_rule) {
      j["radius_rule"] = param_to_json(n.groups.radius);
    } else {
      json groups = json::array();
      for (const auto& g : n.groups.explicit_groups) groups.push_back(g);
      j["groups"] = std::move(groups);
    }
    return j;
  }
  json operator()(const SplitFarfieldNode& n) const {
    json j{{"kind", "split_farfield"},
           {"signal_field", field_to_json(n.signal_field)},
           {"local_length_field", field_to_json(n.local_length_field)},
           {"farfield_length_field", field_to_json(n.farfield_length_field)},
           {"support_radius", param_to_json(n.support_radius)},
           {"matern_length", param_to_json(n.matern_length)},
           {"groups", bump_groups_to_json(n.groups)}};
    if (n.form != WendlandForm::kDefault) j["form"] = form_to_json(n.form);
    return j;
  }
  json operator()(const ProductNode& n) const {
    json children = json::array();
    for (const auto& c : n.children) children.push_back(kernel_spec_to_json(c));
    return json{{"kind", "product"}, {"children", std::move(children)}};
  }
  json operator()(const SumNode& n) const {
    json children = json::array();
    for (const auto& c : n.children) children.push_back(kernel_spec_to_json(c));
    return json{{"kind", "sum"}, {"children", std::move(children)}};
  }
  json operator()(const ScaleNode& n) const {
    return json{{"kind", "scale"},
                {"factor", param_to_json(n.factor)},
                {"child", kernel_spec_to_json(n.child.front())}};
  }
};

}  // namespace

nlohmann::json kernel_spec_to_json(const KernelSpec& spec) {
  return std::visit(SpecToJson{}, spec.node);
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "wendland") {
    WendlandNode n;
    n.support_radius = param_from_json(j.at("support_radius"), "support_radius");
    if (j.contains("form")) n.form = form_from_json(j.at("form"));
    return KernelSpec{std::move(n)};
  }
  if (kind == "matern32") {
    Matern32Node n;
    n.length = param_from_json(j.at("length"), "length");
    n.sigma = param_from_json(j.at("sigma"), "sigma");
    return KernelSpec{std::move(n)};
  }
  if (kind == "nonstat_wendland") {
    NonstatWendlandNode n;
    n.signal_field = field_from_json(j.at("signal_field"));
    n.length_field = field_from_json(j.at("length_field"));
    n.support_radius = param_from_json(j.at("support_radius"), "support_radius");
    if (j.contains("form")) n.form = form_from_json(j.at("form"));
    return KernelSpec{std::move(n)};
  }
  if (kind == "bump_farfield") {
    BumpFarfieldNode n;
    n.groups = bump_groups_from_json(j.at("groups"));
    return KernelSpec{std::move(n)};
  }
  if (kind == "delta_farfield") {
    DeltaFarfieldNode n;
    if (j.contains("radius_rule")) {
      n.groups.radius_rule = true;
      n.groups.radius = param_from_json(j.at("radius_rule"), "radius_rule");
    } else {
      n.groups.explicit_groups =
          j.at("groups").get<std::vector<std::vector<Index>>>();
    }
    return KernelSpec{std::move(n)};
  }
  if (kind == "split_farfield") {
    SplitFarfieldNode n;
    n.signal_field = field_from_json(j.at("signal_field"));
    n.local_length_field = field_from_json(j.at("local_length_field"));
    n.farfield_length_field = field_from_json(j.at("farfield_length_field"));
    n.support_radius = param_from_json(j.at("support_radius"), "support_radius");
    n.matern_length = param_from_json(j.at("matern_length"), "matern_length");
    n.groups = bump_groups_from_json(j.at("groups"));
    if (j.contains("form")) n.form = form_from_json(j.at("form"));
    return KernelSpec{std::move(n)};
  }
  if (kind == "product" || kind == "sum") {
    std::vector<KernelSpec> children;
    for (const auto& jc : j.at("children"))
      children.push_back(kernel_spec_from_json(jc));
    if (kind == "product") return k_product(std::move(children));
    return k_sum(std::move(children));
  }
  if (kind == "scale") {
    return k_scale(param_from_json(j.at("factor"), "factor"),
                   kernel_spec_from_json(j.at("child")));
  }
  throw ConfigError("kernel json: unknown node kind '" + kind + "'");
}

nlohmann::json slots_to_json(const ParameterSpace& space) {
  json out = json::array();
  for (const auto& slot : space.slots())
    out.push_back(json{{"name", slot.name}, {"lo", slot.lo}, {"hi", slot.hi}});
  return out;
}

ParameterSpace slots_from_json(const nlohmann::json& j) {
  ParameterSpace space;
  for (const auto& js : j)
    space.add({js.at("name").get<std::string>(), js.at("lo").get<double>(),
               js.at("hi").get<double>()});
  return space;
}

nlohmann::json kernel_document_to_json(const KernelDocument& doc) {
  return json{{"schema", "sgp.kernel/1"},
              {"slots", slots_to_json(doc.space)},
              {"node", kernel_spec_to_json(doc.spec)}};
}

KernelDocument kernel_document_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "sgp.kernel/1")
    throw ConfigError("kernel json: expected schema sgp.kernel/1");
  KernelDocument doc;
  doc.space = slots_from_json(j.at("slots"));
  doc.spec = kernel_spec_from_json(j.at("node"));
  return doc;
}

KernelDocument load_kernel_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("kernel file " + path.string() + ": " + e.what());
  }
  return kernel_document_from_json(j);
}

void save_kernel_document(const KernelDocument& doc,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write kernel file " + path.string());
  out << kernel_document_to_json(doc).dump(2) << '\n';
}

namespace {

void describe_param(std::ostream& os, const ParamRef& p) {
  if (p.is_slot())
    os << p.slot;
  else
    os << p.fixed;
}

void describe_field(std::ostream& os, const ParametricField& f) {
  os << field_kind_name(f.kind) << '(';
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    if (i) os << ", ";
    os << f.params[i];
  }
  os << ')';
}

struct Describe {
  std::ostream& os;
  int depth;

  void indent() const {
    for (int i = 0; i < depth; ++i) os << "  ";
  }

  void operator()(const WendlandNode& n) const {
    indent();
    os << "wendland(r0=";
    describe_param(os, n.support_radius);
    if (n.form == WendlandForm::kClassical) os << ", classical";
    os << ")\n";
  }
  void operator()(const Matern32Node& n) const {
    indent();
    os << "matern32(length=";
    describe_param(os, n.length);
    os << ", sigma=";
    describe_param(os, n.sigma);
    os << ")\n";
  }
  void operator()(const NonstatWendlandNode& n) const {
    indent();
    os << "nonstat_wendland(r0=";
    describe_param(os, n.support_radius);
    os << ", signal=";
    describe_field(os, n.signal_field);
    os << ", length=";
    describe_field(os, n.length_field);
    os << ")\n";
  }
  void operator()(const BumpFarfieldNode& n) const {
    indent();
    std::size_t total = 0;
    for (const auto& g : n.groups) total += g.bumps.size();
    os << "bump_farfield(" << n.groups.size() << " groups, " << total
       << " bumps)\n";
  }
  void operator()(const DeltaFarfieldNode& n) const {
    indent();
    if (n.groups.radius_rule) {
      os << "delta_farfield(radius rule, rho=";
      describe_param(os, n.groups.radius);
      os << ")\n";
    } else {
      os << "delta_farfield(" << n.groups.explicit_groups.size()
         << " explicit groups)\n";
    }
  }
  void operator()(const SplitFarfieldNode& n) const {
    indent();
    os << "split_farfield(r0=";
    describe_param(os, n.support_radius);
    os << ", matern_length=";
    describe_param(os, n.matern_length);
    os << ", " << n.groups.size() << " bump groups)\n";
  }
  void operator()(const ProductNode& n) const {
    indent();
    os << "product\n";
    for (const auto& c : n.children)
      std::visit(Describe{os, depth + 1}, c.node);
  }
  void operator()(const SumNode& n) const {
    indent();
    os << "sum\n";
    for (const auto& c : n.children)
      std::visit(Describe{os, depth + 1}, c.node);
  }
  void operator()(const ScaleNode& n) const {
    indent();
    os << "scale(factor=";
    describe_param(os, n.factor);
    os << ")\n";
    std::visit(Describe{os, depth + 1}, n.child.front().node);
  }
};

}  // namespace

std::string describe_kernel(const KernelSpec& spec) {
  std::ostringstream os;
  std::visit(Describe{os, 0}, spec.node);
  return os.str();
}

}  // namespace sgp
