#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sandbox::schema {

// An annotation task type. The five PHI categories are the built-in
// instances; non-PHI tasks (COVID symptoms, ...) can be registered at
// runtime without schema changes.
class TaskType {
  public:
    TaskType() = default;
    TaskType(std::string name, std::string pascal)
        : name_(std::move(name)), pascal_(std::move(pascal)) {}

    // Canonical upper-snake name, e.g. "PERSON_NAME".
    const std::string& name() const { return name_; }

    // JSON key of a gold annotation list, e.g. "TextPersonNameAnnotations".
    std::string gold_list_key() const { return "Text" + pascal_ + "Annotations"; }

    // JSON key (and endpoint path segment) of a tool response list,
    // e.g. "textPersonNameAnnotations".
    std::string response_key() const { return "text" + pascal_ + "Annotations"; }

    // Bundle gold file stem, e.g. "person_name".
    std::string file_stem() const;

    bool operator==(const TaskType& o) const { return name_ == o.name_; }

  private:
    std::string name_;
    std::string pascal_;
};

// Registry of known task types. The five PHI built-ins are always present.
class TaskRegistry {
  public:
    TaskRegistry();

    // Registers a new task; throws std::invalid_argument on a name clash or
    // malformed name (must be upper-snake, pascal must be alphabetic).
    void register_task(const std::string& name, const std::string& pascal);

    std::optional<TaskType> find(const std::string& name) const;
    bool contains(const std::string& name) const;

    // All tasks in registration order (built-ins first).
    std::vector<TaskType> all() const;

    // The five built-in PHI categories, in fixed order.
    static const std::vector<TaskType>& phi_categories();

  private:
    mutable std::mutex mu_;
    std::vector<TaskType> tasks_;
};

// Convenience accessors for the built-ins.
namespace tasks {
const TaskType& date();
const TaskType& person_name();
const TaskType& id();
const TaskType& contact();
const TaskType& location();
}  // namespace tasks

}  // namespace sandbox::schema
