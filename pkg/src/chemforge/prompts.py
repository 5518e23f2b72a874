"""Stage prompt templates and their render helpers.

Templates are versioned text assets: tests pin their load-bearing phrases,
so edits that change model-facing contracts fail loudly. Render helpers
produce (system, user) pairs with deterministic user payload serialization,
which keeps fixture digests stable across runs.
"""

from __future__ import annotations

import json
from typing import Any, Mapping, Sequence

from .gateway import DEFAULT_MAX_OUTPUT, PromptRequest

TEMPLATE_VERSION = "1"


def _payload(data: Mapping[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False)


INSTRUCTION_SYNTHESIS = """You are an advanced AI assistant tasked with generating high-quality instructions for synthetic dataset creation.

Your goal is to produce a diverse set of instructions (or questions) based on a given user task. The corresponding answers will be generated later to form a dataset.

### **Instructions:**

1. **Task Understanding:** Carefully analyze the provided task and determine its core objective.

2. **Instruction Generation:** Create exactly `{n}` unique instructions related to the task. The instructions should be diverse in phrasing and complexity.

3. **Clarity & Context:** Ensure each instruction is clear and provides enough context for an AI model to generate a meaningful response.

4. **Format:** Return the instructions strictly as a Python-style list of strings.

5. **Custom Constraint:** {custom_constraint}

6. **Metadata:** If metadata is provided, your instructions should adhere to it.

### **Example:**

#### **User Task:** Toxicity Prediction

#### **Generated Instructions (Example Output):**

[
 "Does benzo[a]pyrene exhibit toxicity to humans?",
 "What is the acute toxicity of trichloroethylene?",
 "Does bisphenol A have endocrine-disrupting effects?",
 "Do pyridine compounds have neurotoxic effects?",
 "Does tetraethyl lead pose long-term toxicity risks to the environment and humans?"
]
"""

INSTRUCTION_DECOMPOSITION = """You are an advanced AI assistant tasked with planning how to solve a given instruction.

Your goal is to **break down the problem into structured steps** that can be executed using external tools or reasoning. You should **not** provide an answer—only a plan.

### **Instructions:**

1. **Understand the Instruction:** Carefully analyze the given instruction to determine its requirements.

2. **Identify Key Elements:** Identify key components such as subject, method, and expected output.

3. **Break Down into Steps:** Generate a structured plan consisting of logical steps that guide the problem-solving process.

4. **Ensure Tool Compatibility:** If an external tool is likely required (e.g., a chemical database, scientific literature, mathematical solver), indicate it explicitly.

5. **Format:** Return the planning steps strictly as a Python-style list of strings.

6. **Metadata:** If metadata is provided, your planning should centre on it.

Now, generate a structured plan for the following instruction:

Instruction: {instruction}

Ensure the output is formatted strictly as a Python list of strings.
"""

TOOL_PLANNING = """You are an advanced AI assistant tasked with defining the ideal tools for executing a plan.

Your goal is to describe the functionalities of these tools concisely, ensuring that each tool serves **one specific purpose**.

### **Instructions:**

1. **Analyze the Planning Steps:** Carefully review the provided planning steps to determine what kind of external tools would be needed to complete them.

2. **Define the Ideal Toolset:** Describe **only the necessary** tools, ensuring that each tool performs only **one function**.

3. **Keep Descriptions Concise:** Each tool description should be brief and focused on its function.

4. **Limit the Number of Tools:** Minimize the number of tools by **combining related functionalities** into single tools where applicable.

5. **Format:** Return the tool descriptions strictly as a Python-style list of strings.

6. **Metadata:** If metadata is provided, your tool planning should refer to it.

Now, generate a structured list of ideal tool descriptions for the following planning steps:

Planning Steps: {planning_steps}

Ensure the output is formatted strictly as a Python list of strings, with each tool description containing only one function.
"""

TOOL_RETRIEVAL = """I will give you the task, a tool name, and its description.

Your goal is to confirm whether the tool can be used to solve the task.

Instructions:

1. You need to extract the final targets of the task and determine whether it requires a specific tool or multiple tools.

2. First, you need to focus on solving the final targets of the task.

3. Second, if the task requires multiple tools and this tool excels in one aspect of the task, it is also useful.

4. If metadata is provided, your choice of tool should be based on the requirements of the metadata.

Output format:

1. If the tool can be used for solving the task, return the tool index only. It should be an integer.

2. If the tool can't be used for solving the task, return the string "no" only. It should be a string.
"""

TOOL_DISTILLATION = """I will give you a list of tools that have been screened, and they are all related to the task. I will also give you the raw task.

Problems:

1. Although these tools are all related to the task, some may be indirectly related to the task, or the tool may not be an expert in the task.

2. Some tools may not be able to solve the final targets of the task.

Your goal is to check the tools and confirm whether they need to remove some indirectly related tools.

Strategies for tool selection:

1. Pay attention to the tools' names. The tool name contains its function, and if the task needs the tool, the name often appears in the tool description.

2. Throw light on the task content. The content may clarify what tools or what kinds of tools are needed for the task.

Instructions:

1. Read the tools list and the task carefully, compare the tools' functions with the task, and check if the task marks specific tools to use.

2. Analyse the task and extract the final targets of the task. Regarding the tools can't solve the final targets of the task as useless tools, you should focus on the final targets of the task.

3. If the number of tools overnumbers the threshold: {threshold_for_tool_distilling}, you should think more about finding and removing indirectly related tools.
In another situation, if the task only needs a few steps to solve, you should think more about using fewer tools.

4. If metadata is provided, your choice of tool should be based on the requirements of the metadata.

Output format:

1. If the indirectly related tools are found, please return only the most indirectly related tool index.

2. If no indirectly related tools are found, please return the string "no" only.

3. You should return the content described above without any prefixes or suffixes.
"""

SCRIPT_GENERATION = """I will give you some key-value pairs that describe the task, module name, function name, and parameters with specific values.

Your goal is to write a script for calling the function with the given parameters.

Instructions:

1. Import the module in this format: "import module_name".

The module name will be given in the user prompt under the "module_name" key.

2. Some parameters may need other packages. Please check the parameters and import the required packages.

3. Create variables for the parameters and fill them with the given values.

4. Call the function with the parameters and print the result. When printing the result, you need to describe what it means and not just print it.

Important:

The function name will be in the user prompt under the "function_name" key.

Output format:

Return the script content only without any useless prefixes or suffixes.
"""

ERROR_CATCHING = """I will give you a Python script and its error message.

Your goal is to fix the error in the script according to the error message.

Output format:

Return the fixed script content only, without any useless prefixes or suffixes like double quotation or back quote marks to mark this as a Python file.
"""

EFFECTIVENESS_CHECKING = """I will give you the task, the planning steps for solving the task, the script for the task, and its output.

Your goal is to determine whether the output is useful for solving the task.

The criteria for judging the uselessness of the output:

1. The output is an object without valid characters or numeric information. This one is important and often appears. Please pay attention.

2. The output is discordant or irrelevant to the task.

3. The script does not follow the planning steps, focusing on checking the input variables and output format.

4. The output is not the accurate data the task requires.

If you find the output is useless, you can modify the script according to the website given below:

{website}

Output format:

1. Return the "useful" string only if the script output is useful.

2. Return the modified script content only if the output script is useless.

3. The modified script content should be without any useless prefixes or suffixes like double quotation or back quote marks.
"""

SUFFICIENCY_VALIDATION = """I will give you a task and the results of some tools used to solve the task.

Your goal is to judge whether the present results are sufficient for solving the task.

Output format:

1. Return the string "yes" only if the results are sufficient.

2. Return the string "no" only if the results are insufficient.
"""

WEB_SEARCH = """I will give you a task and the planning steps for solving the task.

Your goal is to search for the related information to solve the task online.
"""

ANSWER_ASSEMBLY = """I will give you a task and some information generated from some tools for the task.

Your goal is to analyze and solve the task. You can choose useful information generated from the tools to make your answer accurate and correct.

Instructions:

1. Read the task carefully and analyze its requirements.

2. Read the information given by the tools carefully and determine whether it can be used directly.

3. If the information cannot be used directly, you should transform it according to the task's requirements.

4. If you receive multiple answers but they are different, you can process them in two ways:

(1) Choose the most accurate answer based on your judgment.

(2) If the answers have descriptions about how they are generated, you can output all answers with their descriptions and let the user choose the most accurate one.

5. Ensure the answer has good readability. You can change the illustration format if needed.
"""

JUDGE_SCORE10 = """You are an evaluator for grading the quality of answers to chemistry questions. I will provide you with a question, a predicted answer, and a reference answer.

Your task is to compare the predicted answer to the reference answer and assess how well they match in meaning.

Consider factors such as accuracy, completeness, and clarity, even if the wording is different.

Please first analyze the differences and similarities between the predicted and reference answers.

Then give a final score from 1 to 10, where 10 means a perfect match in meaning and 1 means completely incorrect.

Here is the question: {question}

Here is the predicted answer: {predicted}

Here is the reference answer: {reference}

Respond only with the following format on the final line:

Final score: X
"""

JUDGE_BINARY = """You are an evaluator for evaluating whether a response to a chemistry question is correct or not.

I will provide you with a question, the predicted answer, and the correct answer.

Your task is to determine if the predicted answer matches the correct answer in meaning, even if the wording is slightly different. Please first compare the predicted answer with correct answer and analyze them, and finally respond with 'correct' or 'incorrect'.

Here is the question: {question}

Here is the predicted answer: {predicted}

Here is the correct answer: {reference}
"""

STEP_COUNTING = """I will give you a response to a task.

Your goal is to count how many distinct reasoning steps the response contains.

Output format:

Return the number of steps only. It should be a single integer.
"""

FEEDBACK_HEADER = (
    "A previous instruction generated for this task did not match the requested "
    "difficulty level. Revise or regenerate it so the difficulty aligns, using "
    "this feedback about what made it too simple or too complex:"
)


def render_synthesis(
    task_description: str,
    constraint_text: str,
    metadata_payload: Any,
    n: int,
    feedback: Sequence[str] | None = None,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    system = INSTRUCTION_SYNTHESIS.format(n=n, custom_constraint=constraint_text)
    body: dict[str, Any] = {"task": task_description, "metadata": metadata_payload}
    if feedback:
        body["difficulty_feedback"] = {"notice": FEEDBACK_HEADER, "feedback": list(feedback)}
    return PromptRequest("synthesize", system, _payload(body), max_output=max_output)


def render_decompose(
    instruction_text: str, metadata_payload: Any, max_output: int = DEFAULT_MAX_OUTPUT
) -> PromptRequest:
    system = INSTRUCTION_DECOMPOSITION.format(instruction=instruction_text)
    return PromptRequest(
        "decompose", system, _payload({"metadata": metadata_payload}), max_output=max_output
    )


def render_plan_tools(
    steps: Sequence[str], metadata_payload: Any, max_output: int = DEFAULT_MAX_OUTPUT
) -> PromptRequest:
    system = TOOL_PLANNING.format(planning_steps=_payload(list(steps)))
    return PromptRequest(
        "plan_tools", system, _payload({"metadata": metadata_payload}), max_output=max_output
    )


def render_confirm(
    task_text: str,
    tool_index: int,
    tool_name: str,
    tool_description: str,
    metadata_payload: Any,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    user = _payload(
        {
            "task": task_text,
            "tool_index": tool_index,
            "tool_name": tool_name,
            "tool_description": tool_description,
            "metadata": metadata_payload,
        }
    )
    return PromptRequest("confirm_tool", TOOL_RETRIEVAL, user, max_output=max_output)


def render_distill(
    task_text: str,
    numbered_tools: Sequence[str],
    threshold: int,
    metadata_payload: Any,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    system = TOOL_DISTILLATION.format(threshold_for_tool_distilling=threshold)
    user = _payload(
        {"task": task_text, "tools": list(numbered_tools), "metadata": metadata_payload}
    )
    return PromptRequest("distill", system, user, max_output=max_output)


def render_script(
    task_text: str,
    module_name: str,
    function_name: str,
    parameters: Mapping[str, Any],
    doc_context: str = "",
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    body: dict[str, Any] = {
        "task": task_text,
        "module_name": module_name,
        "function_name": function_name,
        "parameters": dict(parameters),
    }
    if doc_context:
        body["documentation"] = doc_context
    role = "doc_fallback" if doc_context else "generate_script"
    return PromptRequest(role, SCRIPT_GENERATION, _payload(body), max_output=max_output)


def render_fix_error(
    script_text: str, error_text: str, metadata_payload: Any, max_output: int = DEFAULT_MAX_OUTPUT
) -> PromptRequest:
    user = _payload(
        {"script": script_text, "error": error_text, "metadata": metadata_payload}
    )
    return PromptRequest("fix_error", ERROR_CATCHING, user, max_output=max_output)


def render_effectiveness(
    task_text: str,
    steps: Sequence[str],
    script_text: str,
    output_text: str,
    website: str,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    system = EFFECTIVENESS_CHECKING.format(website=website or "(no documentation website)")
    user = _payload(
        {
            "task": task_text,
            "planning_steps": list(steps),
            "script": script_text,
            "output": output_text,
        }
    )
    return PromptRequest("check_effectiveness", system, user, max_output=max_output)


def render_results_check(
    role_id: str, task_text: str, results: Sequence[str], max_output: int = DEFAULT_MAX_OUTPUT
) -> PromptRequest:
    """Shared render for the early-stop and sufficiency yes/no checks."""
    user = _payload({"task": task_text, "results": list(results)})
    return PromptRequest(role_id, SUFFICIENCY_VALIDATION, user, max_output=max_output)


def render_web_search(
    task_text: str, steps: Sequence[str], max_output: int = DEFAULT_MAX_OUTPUT
) -> PromptRequest:
    user = _payload({"task": task_text, "planning_steps": list(steps)})
    return PromptRequest("web_search", WEB_SEARCH, user, max_output=max_output)


def render_assemble(
    task_text: str,
    outputs: Sequence[Mapping[str, Any]],
    metadata_payload: Any,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    user = _payload(
        {"task": task_text, "tool_outputs": list(outputs), "metadata": metadata_payload}
    )
    return PromptRequest("assemble", ANSWER_ASSEMBLY, user, max_output=max_output)


def render_count_steps(response_text: str, max_output: int = 64) -> PromptRequest:
    return PromptRequest(
        "count_steps", STEP_COUNTING, _payload({"response": response_text}), max_output=max_output
    )


def render_judge(
    mode: str,
    question: str,
    predicted: str,
    reference: str,
    max_output: int = DEFAULT_MAX_OUTPUT,
) -> PromptRequest:
    template = {"binary": JUDGE_BINARY, "score10": JUDGE_SCORE10}[mode]
    system = template.format(question=question, predicted=predicted, reference=reference)
    return PromptRequest("judge", system, "Evaluate now.", max_output=max_output)
