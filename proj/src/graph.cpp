#include "scitag/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <unordered_map>

#include "scitag/corpus.hpp"
#include "scitag/error.hpp"

namespace scitag {

const ParamValue* ComponentDecl::param(std::string_view key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return &v;
  }
  return nullptr;
}

const ComponentDecl* ComponentGraph::find(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<std::pair<std::string, std::string>> ComponentGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& n : nodes) {
    for (const auto& d : n.deps) out.emplace_back(d.id, n.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

void collect(const std::string& id, const config::Table& table, ComponentGraph& graph,
             bool classOptional) {
  ComponentDecl decl;
  decl.id = id;
  decl.line = table.line;
  std::vector<std::pair<std::string, const config::Table*>> children;

  for (const auto& entry : table.entries) {
    if (entry.key == "class") {
      const auto* scalar = std::get_if<config::Scalar>(&entry.value);
      const auto* name = scalar ? std::get_if<std::string>(scalar) : nullptr;
      if (!name || name->empty()) {
        throw Error(Errc::ConfigError,
                    "line " + std::to_string(entry.line) + ": 'class' of [" + id +
                        "] must be a non-empty string");
      }
      decl.className = *name;
    } else if (const auto* s = std::get_if<config::Scalar>(&entry.value)) {
      decl.params.emplace_back(entry.key, *s);
    } else if (const auto* a = std::get_if<config::Array>(&entry.value)) {
      decl.params.emplace_back(entry.key, *a);
    } else if (const auto* t = std::get_if<config::TablePtr>(&entry.value)) {
      const std::string childId = id + "." + entry.key;
      decl.deps.push_back({entry.key, childId});
      children.emplace_back(childId, t->get());
    } else {
      const auto& arr = std::get<config::TableArray>(entry.value);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string childId = id + "." + entry.key + "[" + std::to_string(i) + "]";
        decl.deps.push_back({entry.key, childId});
        children.emplace_back(childId, arr[i].get());
      }
    }
  }
  if (decl.className.empty()) {
    if (!classOptional) {
      throw Error(Errc::MissingClassKey, "table [" + id + "] has no 'class' key", table.line, {id});
    }
    decl.className = "Engine";
  }
  graph.nodes.push_back(std::move(decl));
  for (const auto& [childId, child] : children) collect(childId, *child, graph, false);
}

}  // namespace

ComponentGraph parseExperimentText(std::string_view text) {
  const config::Table root = config::parse(text);
  ComponentGraph graph;
  for (const auto& entry : root.entries) {
    const bool known = std::find(std::begin(kSections), std::end(kSections), entry.key) !=
                       std::end(kSections);
    const auto* table = std::get_if<config::TablePtr>(&entry.value);
    if (!known || !table) {
      throw Error(Errc::UnknownSection,
                  "line " + std::to_string(entry.line) + ": unexpected top-level entry '" +
                      entry.key + "' (expected [dataset], [model] or [engine])",
                  entry.line, {entry.key});
    }
    graph.roots.push_back(entry.key);
    collect(entry.key, **table, graph, entry.key == "engine");
  }
  if (!root.find("model")) {
    throw Error(Errc::MissingSection, "experiment has no [model] section", std::nullopt, {"model"});
  }
  return graph;
}

ComponentGraph parseExperiment(const std::filesystem::path& path) {
  return parseExperimentText(readFile(path));
}

// ---------------------------------------------------------------------------
// Validation and ordering

void validateGraph(const ComponentGraph& graph) {
  std::unordered_map<std::string, const ComponentDecl*> byId;
  for (const auto& n : graph.nodes) {
    if (!byId.emplace(n.id, &n).second) {
      throw Error(Errc::DuplicateId, "duplicate component id '" + n.id + "'", std::nullopt, {n.id});
    }
  }
  for (const auto& n : graph.nodes) {
    for (const auto& d : n.deps) {
      if (!byId.contains(d.id)) {
        throw Error(Errc::DanglingReference,
                    "component '" + n.id + "' depends on missing '" + d.id + "'", std::nullopt,
                    {n.id, d.id});
      }
    }
  }

  // Iterative DFS with white/grey/black colors over dependency links,
  // visiting ids in sorted order so the reported cycle is deterministic.
  enum class Color { White, Grey, Black };
  std::map<std::string, Color> color;
  for (const auto& n : graph.nodes) color[n.id] = Color::White;

  for (const auto& [startId, _] : color) {
    if (color[startId] != Color::White) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{startId, 0}};
    color[startId] = Color::Grey;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const auto& deps = byId.at(id)->deps;
      if (next == deps.size()) {
        color[id] = Color::Black;
        stack.pop_back();
        continue;
      }
      const std::string child = deps[next++].id;
      if (color[child] == Color::Grey) {
        std::vector<std::string> cycle;
        auto it = std::find_if(stack.begin(), stack.end(),
                               [&](const auto& frame) { return frame.first == child; });
        for (; it != stack.end(); ++it) cycle.push_back(it->first);
        std::string msg = "dependency cycle:";
        for (const auto& c : cycle) msg += " " + c;
        throw Error(Errc::CycleDetected, msg, std::nullopt, cycle);
      }
      if (color[child] == Color::White) {
        color[child] = Color::Grey;
        stack.emplace_back(child, 0);
      }
    }
  }
}

InstantiationPlan topoOrder(const ComponentGraph& graph) {
  std::map<std::string, std::size_t> indegree;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& n : graph.nodes) indegree.emplace(n.id, 0);
  for (const auto& [from, to] : graph.edges()) {
    if (!indegree.contains(from)) {
      throw Error(Errc::DanglingReference, "component '" + to + "' depends on missing '" + from + "'",
                  std::nullopt, {to, from});
    }
    ++indegree[to];
    dependents[from].push_back(to);
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  InstantiationPlan plan;
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    for (const auto& d : dependents[id]) {
      if (--indegree[d] == 0) ready.push(d);
    }
    plan.order.push_back(std::move(id));
  }
  if (plan.order.size() != indegree.size()) {
    std::vector<std::string> stuck;
    for (const auto& [id, deg] : indegree) {
      if (deg > 0) stuck.push_back(id);
    }
    std::string msg = "dependency cycle among:";
    for (const auto& s : stuck) msg += " " + s;
    throw Error(Errc::CycleDetected, msg, std::nullopt, stuck);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Registry and instantiation

std::string_view paramTypeName(ParamType type) {
  switch (type) {
    case ParamType::Int: return "integer";
    case ParamType::Float: return "float";
    case ParamType::Bool: return "boolean";
    case ParamType::String: return "string";
    case ParamType::StringList: return "array of strings";
    case ParamType::IntList: return "array of integers";
  }
  return "?";
}

const ParamValue& Params::at(std::string_view name) const {
  auto it = values_.find(std::string(name));
  if (it == values_.end()) {
    throw Error(Errc::MissingParam, "parameter '" + std::string(name) + "' is not set");
  }
  return it->second;
}

std::int64_t Params::getInt(std::string_view name) const {
  return std::get<std::int64_t>(std::get<config::Scalar>(at(name)));
}

double Params::getFloat(std::string_view name) const {
  const auto& s = std::get<config::Scalar>(at(name));
  if (const auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  return std::get<double>(s);
}

bool Params::getBool(std::string_view name) const {
  return std::get<bool>(std::get<config::Scalar>(at(name)));
}

const std::string& Params::getString(std::string_view name) const {
  return std::get<std::string>(std::get<config::Scalar>(at(name)));
}

std::vector<std::string> Params::getStringList(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& s : std::get<config::Array>(at(name))) out.push_back(std::get<std::string>(s));
  return out;
}

std::vector<std::int64_t> Params::getIntList(std::string_view name) const {
  std::vector<std::int64_t> out;
  for (const auto& s : std::get<config::Array>(at(name))) out.push_back(std::get<std::int64_t>(s));
  return out;
}

void ComponentRegistry::add(std::string className, ComponentClass cls) {
  classes_[std::move(className)] = std::move(cls);
}

const ComponentClass* ComponentRegistry::find(std::string_view className) const {
  auto it = classes_.find(className);
  return it == classes_.end() ? nullptr : &it->second;
}

std::vector<std::string> ComponentRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : classes_) out.push_back(name);
  return out;
}

void ComponentRegistry::reject(std::string className, std::string reason) {
  rejected_[std::move(className)] = std::move(reason);
}

const std::string* ComponentRegistry::rejection(std::string_view className) const {
  auto it = rejected_.find(className);
  return it == rejected_.end() ? nullptr : &it->second;
}

namespace {

bool matches(const ParamValue& v, ParamType type) {
  if (const auto* s = std::get_if<config::Scalar>(&v)) {
    switch (type) {
      case ParamType::Int: return std::holds_alternative<std::int64_t>(*s);
      case ParamType::Float:
        return std::holds_alternative<double>(*s) || std::holds_alternative<std::int64_t>(*s);
      case ParamType::Bool: return std::holds_alternative<bool>(*s);
      case ParamType::String: return std::holds_alternative<std::string>(*s);
      default: return false;
    }
  }
  const auto& arr = std::get<config::Array>(v);
  if (type == ParamType::StringList) {
    return std::all_of(arr.begin(), arr.end(),
                       [](const auto& s) { return std::holds_alternative<std::string>(s); });
  }
  if (type == ParamType::IntList) {
    return std::all_of(arr.begin(), arr.end(),
                       [](const auto& s) { return std::holds_alternative<std::int64_t>(s); });
  }
  return false;
}

}  // namespace

Params resolveParams(const ComponentDecl& decl, const ComponentClass& cls) {
  std::map<std::string, ParamValue> values;
  for (const auto& [key, value] : decl.params) {
    auto spec = std::find_if(cls.params.begin(), cls.params.end(),
                             [&](const ParamSpec& p) { return p.name == key; });
    if (spec == cls.params.end()) {
      throw Error(Errc::ExtraParam,
                  "[" + decl.id + "] " + decl.className + " has no parameter '" + key + "'",
                  decl.line, {decl.id, key});
    }
    if (!matches(value, spec->type)) {
      const std::string expected(paramTypeName(spec->type));
      throw Error(Errc::ParamTypeError,
                  "[" + decl.id + "] parameter '" + key + "' must be " + expected,
                  decl.line, {decl.id, key, expected});
    }
    values[key] = value;
  }
  for (const auto& spec : cls.params) {
    if (values.contains(spec.name)) continue;
    if (spec.defaultValue) {
      values[spec.name] = *spec.defaultValue;
    } else if (!spec.optional) {
      throw Error(Errc::MissingParam,
                  "[" + decl.id + "] " + decl.className + " requires parameter '" + spec.name + "'",
                  decl.line, {decl.id, spec.name});
    }
  }

  std::map<std::string, std::size_t> roleCounts;
  for (const auto& d : decl.deps) ++roleCounts[d.role];
  for (const auto& [role, n] : roleCounts) {
    auto spec = std::find_if(cls.roles.begin(), cls.roles.end(),
                             [&](const RoleSpec& r) { return r.name == role; });
    if (spec == cls.roles.end()) {
      throw Error(Errc::ExtraParam,
                  "[" + decl.id + "] " + decl.className + " takes no '" + role + "' component",
                  decl.line, {decl.id, role});
    }
    if (n > spec->max) {
      throw Error(Errc::ExtraParam,
                  "[" + decl.id + "] " + decl.className + " takes at most " +
                      std::to_string(spec->max) + " '" + role + "' component(s)",
                  decl.line, {decl.id, role});
    }
  }
  for (const auto& spec : cls.roles) {
    if (roleCounts[spec.name] < spec.min) {
      throw Error(Errc::MissingParam,
                  "[" + decl.id + "] " + decl.className + " needs a '" + spec.name + "' component",
                  decl.line, {decl.id, spec.name});
    }
  }
  return Params(std::move(values));
}

std::map<std::string, ComponentPtr> instantiate(const ComponentGraph& graph,
                                                const InstantiationPlan& plan,
                                                const ComponentRegistry& registry) {
  // Check every class up front so no constructor runs on a doomed graph.
  for (const auto& id : plan.order) {
    const ComponentDecl* decl = graph.find(id);
    if (!decl) throw Error(Errc::DanglingReference, "plan names unknown component '" + id + "'");
    if (const std::string* reason = registry.rejection(decl->className)) {
      throw Error(Errc::UnsupportedClass,
                  "class '" + decl->className + "' in [" + id + "] is not supported: " + *reason,
                  decl->line, {decl->className});
    }
    if (!registry.find(decl->className)) {
      throw Error(Errc::UnknownClass, "unknown class '" + decl->className + "' in [" + id + "]",
                  decl->line, {decl->className});
    }
  }
  std::map<std::string, ComponentPtr> built;
  for (const auto& id : plan.order) {
    const ComponentDecl& decl = *graph.find(id);
    const ComponentClass& cls = *registry.find(decl.className);
    const Params params = resolveParams(decl, cls);
    Dependencies deps;
    for (const auto& d : decl.deps) {
      auto it = built.find(d.id);
      if (it == built.end()) {
        throw Error(Errc::CycleDetected, "'" + d.id + "' is not built before '" + id + "'",
                    std::nullopt, {d.id, id});
      }
      deps[d.role].push_back(it->second);
    }
    ComponentPtr obj = cls.construct(decl, params, deps);
    obj->id = decl.id;
    obj->className = decl.className;
    built.emplace(id, std::move(obj));
  }
  return built;
}

}  // namespace scitag
