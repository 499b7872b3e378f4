#include "sandbox/tasks.hpp"

#include <cctype>
#include <stdexcept>

namespace sandbox::schema {

std::string TaskType::file_stem() const {
    std::string out;
    out.reserve(name_.size());
    for (char c : name_) {
        out.push_back(c == '_' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

const std::vector<TaskType>& TaskRegistry::phi_categories() {
    static const std::vector<TaskType> builtins = {
        TaskType("DATE", "Date"),
        TaskType("PERSON_NAME", "PersonName"),
        TaskType("ID", "Id"),
        TaskType("CONTACT", "Contact"),
        TaskType("LOCATION", "Location"),
    };
    return builtins;
}

TaskRegistry::TaskRegistry() : tasks_(phi_categories()) {}

void TaskRegistry::register_task(const std::string& name, const std::string& pascal) {
    if (name.empty() || pascal.empty()) {
        throw std::invalid_argument("task name and pascal key must be non-empty");
    }
    for (char c : name) {
        if (!(std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_')) {
            throw std::invalid_argument("task name must be UPPER_SNAKE: " + name);
        }
    }
    for (char c : pascal) {
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            throw std::invalid_argument("task pascal key must be alphabetic: " + pascal);
        }
    }
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& t : tasks_) {
        if (t.name() == name) throw std::invalid_argument("task already registered: " + name);
    }
    tasks_.emplace_back(name, pascal);
}

std::optional<TaskType> TaskRegistry::find(const std::string& name) const {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& t : tasks_) {
        if (t.name() == name) return t;
    }
    return std::nullopt;
}

bool TaskRegistry::contains(const std::string& name) const { return find(name).has_value(); }

std::vector<TaskType> TaskRegistry::all() const {
    std::lock_guard<std::mutex> lock(mu_);
    return tasks_;
}

namespace tasks {
const TaskType& date() { return TaskRegistry::phi_categories()[0]; }
const TaskType& person_name() { return TaskRegistry::phi_categories()[1]; }
const TaskType& id() { return TaskRegistry::phi_categories()[2]; }
const TaskType& contact() { return TaskRegistry::phi_categories()[3]; }
const TaskType& location() { return TaskRegistry::phi_categories()[4]; }
}  // namespace tasks

}  // namespace sandbox::schema
