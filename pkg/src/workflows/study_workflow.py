"""
End-to-end study workflow implemented with LangGraph.
"""
from typing import Any, Callable, Dict, List, Literal, Optional

from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from ..config.experiment import ExperimentConfig
from ..utils.errors import ConfigError
from ..utils.logging import get_logger
from .stages import STAGE_COMMANDS, STAGES


class StudyState(TypedDict):
    """State schema for the study workflow."""
    config: ExperimentConfig
    stop_after: str
    completed: List[str]
    results: Dict[str, Any]
    error: str
    failed_stage: str


class StudyWorkflow:
    """
    LangGraph workflow running ingest -> train -> attack -> defend -> report.

    After every stage a router either continues, stops early (stop_after),
    or jumps to finalize when the stage failed.
    """

    def __init__(self, commands: Optional[Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]]] = None):
        self.logger = get_logger("workflow.study")
        self.commands = dict(commands or STAGE_COMMANDS)
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(StudyState)

        for stage in STAGES:
            workflow.add_node(stage, self._stage_node(stage))
        workflow.add_node("finalize", self._finalize)

        workflow.set_entry_point(STAGES[0])
        for stage, following in zip(STAGES, STAGES[1:] + ("finalize",)):
            workflow.add_conditional_edges(
                stage,
                self._route,
                {"next": following, "stop": "finalize", "error": "finalize"},
            )
        workflow.add_edge("finalize", END)

        return workflow.compile()

    def run(self, config: ExperimentConfig, stop_after: str = STAGES[-1]) -> Dict[str, Any]:
        """
        Run the study.

        Args:
            config: Experiment configuration
            stop_after: Last stage to execute

        Returns:
            Final workflow state (results per completed stage, error if any)
        """
        if stop_after not in STAGES:
            raise ConfigError(f"unknown stage '{stop_after}', expected one of {', '.join(STAGES)}")
        self.logger.info(f"Starting study '{config.name}' (config {config.config_hash()[:12]}), stopping after {stop_after}")

        initial_state = StudyState(
            config=config,
            stop_after=stop_after,
            completed=[],
            results={},
            error="",
            failed_stage="",
        )
        return self.graph.invoke(initial_state)

    def _stage_node(self, stage: str):
        def node(state: StudyState) -> Dict[str, Any]:
            self.logger.info(f"Running stage {stage}")
            try:
                result = self.commands[stage](state["config"])
            except Exception as e:
                self.logger.error(f"Stage {stage} failed: {e}")
                return {"error": str(e), "failed_stage": stage, "results": {**state["results"], stage: {"exception": e}}}
            return {
                "completed": state["completed"] + [stage],
                "results": {**state["results"], stage: result},
            }

        return node

    def _route(self, state: StudyState) -> Literal["next", "stop", "error"]:
        if state.get("error"):
            return "error"
        if state["completed"] and state["completed"][-1] == state["stop_after"]:
            return "stop"
        return "next"

    def _finalize(self, state: StudyState) -> Dict[str, Any]:
        if state.get("error"):
            self.logger.error(f"Study stopped at {state['failed_stage']}: {state['error']}")
        else:
            self.logger.info(f"Study finished: {', '.join(state['completed'])}")
        return {"completed": state["completed"]}


def run_study(config: ExperimentConfig, stop_after: str = STAGES[-1]) -> Dict[str, Any]:
    """Convenience wrapper around StudyWorkflow.run."""
    return StudyWorkflow().run(config, stop_after)
