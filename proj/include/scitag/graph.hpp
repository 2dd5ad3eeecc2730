#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "scitag/config.hpp"

namespace scitag {

using ParamValue = std::variant<config::Scalar, config::Array>;

struct Dependency {
  std::string role;
  std::string id;

  bool operator==(const Dependency&) const = default;
};

/// One `class = "..."` table of the experiment file. Ids are derived from
/// the table path, with array-of-table members indexed: `model.encoder.embedder[0]`.
struct ComponentDecl {
  std::string id;
  std::string className;
  std::vector<std::pair<std::string, ParamValue>> params;
  std::vector<Dependency> deps;
  std::size_t line = 0;

  const ParamValue* param(std::string_view key) const;
};

struct ComponentGraph {
  std::vector<ComponentDecl> nodes;  // declaration order
  std::vector<std::string> roots;    // section roots present, in file order

  const ComponentDecl* find(std::string_view id) const;
  /// (dependency, dependent) pairs.
  std::vector<std::pair<std::string, std::string>> edges() const;
};

inline constexpr std::string_view kSections[] = {"dataset", "model", "engine"};

ComponentGraph parseExperiment(const std::filesystem::path& path);
ComponentGraph parseExperimentText(std::string_view text);

/// Throws CycleDetected, DanglingReference or DuplicateId.
void validateGraph(const ComponentGraph& graph);

struct InstantiationPlan {
  std::vector<std::string> order;
};

/// Kahn's algorithm; the lexicographically smallest ready id goes first.
InstantiationPlan topoOrder(const ComponentGraph& graph);

// ---------------------------------------------------------------------------
// Registry

enum class ParamType { Int, Float, Bool, String, StringList, IntList };

std::string_view paramTypeName(ParamType type);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  std::optional<ParamValue> defaultValue;  // nullopt + !optional => required
  bool optional = false;                   // may be absent without a default
};

struct RoleSpec {
  std::string name;
  std::size_t min = 0;
  std::size_t max = 1;
};

/// Parameters after schema checking, with defaults filled in.
class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, ParamValue> values) : values_(std::move(values)) {}

  bool has(std::string_view name) const { return values_.contains(std::string(name)); }
  std::int64_t getInt(std::string_view name) const;
  double getFloat(std::string_view name) const;
  bool getBool(std::string_view name) const;
  const std::string& getString(std::string_view name) const;
  std::vector<std::string> getStringList(std::string_view name) const;
  std::vector<std::int64_t> getIntList(std::string_view name) const;

  const std::map<std::string, ParamValue>& values() const noexcept { return values_; }

 private:
  const ParamValue& at(std::string_view name) const;
  std::map<std::string, ParamValue> values_;
};

struct Component {
  virtual ~Component() = default;
  std::string id;
  std::string className;
};

using ComponentPtr = std::shared_ptr<Component>;
using Dependencies = std::map<std::string, std::vector<ComponentPtr>>;

struct ComponentClass {
  std::vector<ParamSpec> params;
  std::vector<RoleSpec> roles;
  std::function<ComponentPtr(const ComponentDecl&, const Params&, const Dependencies&)> construct;
};

class ComponentRegistry {
 public:
  void add(std::string className, ComponentClass cls);
  const ComponentClass* find(std::string_view className) const;
  std::vector<std::string> names() const;

  /// Known class names that are refused with UnsupportedClass and a reason.
  void reject(std::string className, std::string reason);
  const std::string* rejection(std::string_view className) const;

 private:
  std::map<std::string, ComponentClass, std::less<>> classes_;
  std::map<std::string, std::string, std::less<>> rejected_;
};

/// Checks declared params and child roles against the class schema.
Params resolveParams(const ComponentDecl& decl, const ComponentClass& cls);

/// Builds every node in plan order, handing each constructor its already
/// built dependencies grouped by role. Returns all instances by id.
std::map<std::string, ComponentPtr> instantiate(const ComponentGraph& graph,
                                                const InstantiationPlan& plan,
                                                const ComponentRegistry& registry);

}  // namespace scitag
