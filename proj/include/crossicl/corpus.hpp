#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace crossicl {

struct Instance {
  std::string instance_id;
  std::string input;                    // task input x
  std::vector<std::string> references;  // gold outputs y, non-empty

  bool operator==(const Instance&) const = default;
};

struct TaskRecord {
  std::string task_id;
  std::string description;  // task description d
  std::string category;
  std::vector<Instance> instances;
  std::optional<std::string> template_summary;  // filled by selection

  bool operator==(const TaskRecord&) const = default;
};

struct TargetQuery {
  std::string description;  // d_t
  std::string input;        // x_t
  std::vector<std::string> references;  // gold, evaluation mode only
};

// d ⊕ x rendering used for the full_query embedding channel.
std::string full_query_text(const std::string& description,
                            const std::string& input);
std::string full_query_text(const TargetQuery& q);

struct Corpus {
  std::map<std::string, TaskRecord> source_tasks;
  std::map<std::string, TaskRecord> target_tasks;

  bool empty() const { return source_tasks.empty() && target_tasks.empty(); }
};

// Field-name mapping for the task-file JSON schema. Defaults mirror the
// Super-NI layout; extra fields in files are ignored.
struct TaskSchema {
  std::string definition = "definition";
  std::string category = "category";
  std::string instances = "instances";
  std::string instance_id = "id";
  std::string input = "input";
  std::string output = "output";
};

TaskRecord ingest_task_file(const std::filesystem::path& path,
                            const TaskSchema& schema = {});
TaskRecord task_from_json(const nlohmann::json& doc, const std::string& task_id,
                          const TaskSchema& schema = {});
nlohmann::json serialize_task(const TaskRecord& task,
                              const TaskSchema& schema = {});

Corpus build_corpus(const std::filesystem::path& source_dir,
                    const std::filesystem::path& target_dir,
                    const TaskSchema& schema = {});

std::vector<Instance> take_head(const TaskRecord& task, std::size_t k);

}  // namespace crossicl
