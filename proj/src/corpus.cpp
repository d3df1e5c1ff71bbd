#include "crossicl/corpus.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

std::string full_query_text(const std::string& description, const std::string& input) {
  return "Task Instruction:\n" + description + "\n\n" + input;
}

std::string full_query_text(const TargetQuery& q) {
  return full_query_text(q.description, q.input);
}

TaskRecord task_from_json(const nlohmann::json& doc, const std::string& task_id,
                          const TaskSchema& schema) {
  if (!doc.is_object())
    throw IngestError("malformed", task_id + ": top-level value is not an object");
  if (!doc.contains(schema.definition) || !doc[schema.definition].is_string())
    throw IngestError("no_description", task_id + ": missing " + schema.definition);

  TaskRecord task;
  task.task_id = task_id;
  task.description = doc[schema.definition].get<std::string>();
  if (trim(task.description).empty())
    throw IngestError("no_description", task_id + ": empty " + schema.definition);
  if (doc.contains(schema.category) && doc[schema.category].is_string())
    task.category = doc[schema.category].get<std::string>();

  if (!doc.contains(schema.instances) || !doc[schema.instances].is_array())
    throw IngestError("malformed", task_id + ": missing " + schema.instances + " array");
  std::size_t auto_id = 0;
  for (const auto& item : doc[schema.instances]) {
    if (!item.is_object() || !item.contains(schema.input) ||
        !item[schema.input].is_string() || !item.contains(schema.output))
      throw IngestError("malformed", task_id + ": bad instance entry");
    Instance inst;
    if (item.contains(schema.instance_id) && item[schema.instance_id].is_string())
      inst.instance_id = item[schema.instance_id].get<std::string>();
    else
      inst.instance_id = task_id + "-" + std::to_string(auto_id);
    inst.input = item[schema.input].get<std::string>();
    const auto& out = item[schema.output];
    if (out.is_string()) {
      inst.references.push_back(out.get<std::string>());
    } else if (out.is_array()) {
      for (const auto& ref : out) {
        if (!ref.is_string())
          throw IngestError("malformed", task_id + ": non-string reference");
        inst.references.push_back(ref.get<std::string>());
      }
    } else {
      throw IngestError("malformed", task_id + ": " + schema.output +
                                         " must be string or array");
    }
    if (inst.references.empty())
      throw IngestError("malformed", task_id + "/" + inst.instance_id +
                                         ": empty reference list");
    for (const auto& ref : inst.references)
      if (trim(ref).empty())
        throw IngestError("malformed", task_id + "/" + inst.instance_id +
                                           ": blank reference");
    task.instances.push_back(std::move(inst));
    ++auto_id;
  }
  if (task.instances.empty())
    throw IngestError("empty_task", task_id + ": no instances");
  return task;
}

TaskRecord ingest_task_file(const std::filesystem::path& path, const TaskSchema& schema) {
  if (!std::filesystem::exists(path))
    throw IngestError("io", "no such file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed", path.string() + ": " + e.what());
  }
  return task_from_json(doc, path.stem().string(), schema);
}

nlohmann::json serialize_task(const TaskRecord& task, const TaskSchema& schema) {
  nlohmann::json doc;
  doc[schema.definition] = task.description;
  doc[schema.category] = task.category;
  doc[schema.instances] = nlohmann::json::array();
  for (const auto& inst : task.instances) {
    nlohmann::json item;
    item[schema.instance_id] = inst.instance_id;
    item[schema.input] = inst.input;
    item[schema.output] = inst.references;
    doc[schema.instances].push_back(std::move(item));
  }
  return doc;
}

namespace {

std::vector<std::filesystem::path> sorted_task_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IngestError("io", "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Corpus build_corpus(const std::filesystem::path& source_dir,
                    const std::filesystem::path& target_dir,
                    const TaskSchema& schema) {
  Corpus corpus;
  for (const auto& path : sorted_task_files(source_dir)) {
    TaskRecord task = ingest_task_file(path, schema);
    if (!corpus.source_tasks.emplace(task.task_id, std::move(task)).second)
      throw IngestError("split_conflict", "duplicate source task " + path.stem().string());
  }
  for (const auto& path : sorted_task_files(target_dir)) {
    TaskRecord task = ingest_task_file(path, schema);
    if (corpus.source_tasks.count(task.task_id))
      throw IngestError("split_conflict",
                        task.task_id + " appears in both source and target splits");
    if (!corpus.target_tasks.emplace(task.task_id, std::move(task)).second)
      throw IngestError("split_conflict", "duplicate target task " + path.stem().string());
  }
  if (corpus.source_tasks.empty())
    throw IngestError("empty_split", "no parsable task file in " + source_dir.string());
  if (corpus.target_tasks.empty())
    throw IngestError("empty_split", "no parsable task file in " + target_dir.string());
  return corpus;
}

std::vector<Instance> take_head(const TaskRecord& task, std::size_t k) {
  std::size_t n = std::min(k, task.instances.size());
  return {task.instances.begin(), task.instances.begin() + static_cast<long>(n)};
}

}  // namespace crossicl
