"""Prompt templates for the seven agent roles and a literal placeholder renderer.

Placeholders are ``{name}`` with ``name`` in lowercase snake case. Rendering
is a single pass: text substituted for one placeholder is never scanned
again, so bindings may safely contain braces.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Mapping

from ..errors import ConfigError

PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class AgentRole(str, Enum):
    HISTORICAL_TREND = "historical_trend"
    CURRENT_EVENT = "current_event"
    HUMAN_EXPERTISE = "human_expertise"
    RISK_ANALYSIS = "risk_analysis"
    DECISION = "decision"
    TEMPORAL_REFINEMENT = "temporal_refinement"
    EXPERT_ALIGNMENT = "expert_alignment"


HISTORICAL_TREND = """[Past Gate - Historical Pattern Extraction]

Context:
You analyse recent trading data together with previously recorded analyses and their realized returns. Return is measured close to close: (next close - current close) / current close.

Input:
- Prior analyses with their realized returns:
{past_exps}
- Daily market data (Date, Open, High, Low, Close, Volume):
{data}

Instructions:
- Look for trends, volatility changes, volume anomalies and candlestick behaviour that preceded strong or weak returns.
- Relate realized returns in the prior analyses to the price and volume action around them.
- Keep only signals that are relevant for the next trading day, stated formally and objectively.

Output Format:
Reply with exactly this structure and nothing else:
[Past_summary: <2-4 sentences on the historical trends and signals that matter for the next session>]"""


CURRENT_EVENT = """[Current Gate - Integrated Market Reasoning]

Context:
You combine the latest macroeconomic, policy and company news with the historical pattern summary to produce a short-horizon market signal.

Input:
- Latest events:
{current}
- Historical pattern summary:
{past_info}

Instructions:
- Assess how the events interact with the historical context across relevant markets.
- Name the dominant narrative (for example inflation, tightening, supply disruption) and how markets reacted to it before.
- Keep to actionable, data-supported conclusions with short-term implications.

Output Format:
Reply with exactly this structure and nothing else:
[Current_summary: <2-4 sentences joining current events with the historical view into a clear market signal>]"""


HUMAN_EXPERTISE = """[Persona Gate - Behavioral Adjustment]

Context:
You refine a market analysis using the reasoning of an experienced investor and typical investor behaviour.

Input:
- Retrieved expert knowledge:
{persona}
- Preliminary market analysis:
{current_info}

Instructions:
- Apply the expert's reasoning to the present situation.
- Consider how risk-averse, momentum-driven and contrarian investors are likely to respond (loss aversion, herding, overreaction).
- Keep the result concise, grounded and oriented toward a trading decision.

Output Format:
Reply with exactly this structure and nothing else:
[refined_summary: <2-4 sentences merging the analysis with the expert view and likely investor reactions>]"""


RISK_ANALYSIS = """[Risk Gate - Analytical Consistency Check]

Context:
You judge how consistent the layers of an investment analysis are and how risky acting on them would be.

Input:
- Historical analysis: {past_info}
- Current event analysis: {current_info}
- Expert-refined analysis: {refined_info}
- Proposed action: {decison}

Instructions:
- Compare direction, sentiment and tone across the historical, current and refined analyses.
- Flag contradictions that would make a trade fragile.
- Classify the risk: Low (consistent layers), Medium (partial disagreement or ambiguity), High (conflicting signals).

Output Format:
Reply with exactly this structure and nothing else:
[risk_level: <Low or Medium or High>, risk_evaluation: <2-4 sentences explaining the level>]"""


DECISION = """[Decision Gate - Direction Forecast]

Context:
You forecast whether the asset's next close will be above or below the latest close.

Input:
- Historical analysis: {past_info}
- Current event analysis: {current_info}
- Expert-refined analysis: {refined_info}

Instructions:
- Weigh the three analyses and commit to one direction.
- Use the lowercase token up or down.

Output Format:
Reply with exactly this structure and nothing else:
[direction: <up or down>, rationale: <1-3 sentences>]"""


TEMPORAL_REFINEMENT = """[Temporal Refinement Gate]

You revise the market analysis written for {date} now that its outcome is known.

Return is defined as R = (P_t+1 - P_t) / P_t, where P_t is that day's close and P_t+1 the following close.

Original analysis and forecast:{today_exp}{temp}

Revise the analysis so that its interpretation agrees with the realized direction.
- Change interpretation, not facts, unless a fact must change for consistency.
- Be precise and brief, in standard financial terminology.

Output must follow this structure exactly:
[{date}_summary: <revised analysis>]"""


EXPERT_ALIGNMENT = """[Expert Alignment Gate - Decision Validation]

Role:
You are the controller of a multi-expert advisory system and decide whether to accept each expert's recommendation.

Experts:
- Buffett: long-horizon value investor.
- Soros: macro and reflexivity trader.
- Lynch: growth-oriented stock picker.
- Graham: intrinsic value and margin-of-safety investor.

Inputs:
- Macroeconomic context:
{macro_events}
- Recommendations:
{decisions}

Answer Yes when a recommendation fits both the macro context and the expert's own approach, and No otherwise.

Output Format:
Return one line and nothing else:
[Buffett:<Yes or No>, Soros:<Yes or No>, Lynch:<Yes or No>, Graham:<Yes or No>]"""


TEMPLATES: dict[AgentRole, str] = {
    AgentRole.HISTORICAL_TREND: HISTORICAL_TREND,
    AgentRole.CURRENT_EVENT: CURRENT_EVENT,
    AgentRole.HUMAN_EXPERTISE: HUMAN_EXPERTISE,
    AgentRole.RISK_ANALYSIS: RISK_ANALYSIS,
    AgentRole.DECISION: DECISION,
    AgentRole.TEMPORAL_REFINEMENT: TEMPORAL_REFINEMENT,
    AgentRole.EXPERT_ALIGNMENT: EXPERT_ALIGNMENT,
}


def placeholders(template: str) -> list[str]:
    seen = []
    for name in PLACEHOLDER_RE.findall(template):
        if name not in seen:
            seen.append(name)
    return seen


def render(template: str, bindings: Mapping[str, str]) -> str:
    missing = [name for name in placeholders(template) if name not in bindings]
    if missing:
        raise ConfigError(f"missing prompt binding(s): {', '.join(missing)}")
    return PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), template)


def render_prompt(role: AgentRole, bindings: Mapping[str, str]) -> str:
    return render(TEMPLATES[AgentRole(role)], bindings)
