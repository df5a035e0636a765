"""Fixed prompt strings used by the tools and the judge.

The image and review system prompts are frozen byte-for-byte (golden tests
cover them); edit only with the goldens.
"""

from __future__ import annotations

IMAGE_SYSTEM_PROMPT = "You are an expert in dealing with image in Physics Olympiads."

REVIEW_SYSTEM_PROMPT = (
    "You are an uncompromising Physics peer-reviewer. Your job is to find *every* logical, "
    "mathematical error in the worker's answer. "
    "Check dimensional consistency, missing steps, incorrect sign conventions, numerical "
    "mistakes, and unclear explanations. Focus especially on wrong answers, less on presentations."
    "Be extremely critical: if something is wrong, point it out and request clarification or "
    "correction. Mainly focus on errors that would lead to a wrong result, rather than focusing "
    "extremely on presentation or style."
    "It is possible that the worker's answer is not correct, so please be prepared to provide "
    "detailed feedback. The worker's answer contains some error, so you must check and point it "
    "out. Also, if the worker reads measurements from image, make sure to remind the worker that "
    "whenever it reads or measures from image, it uses the ask_image_expert tool, or the readings "
    "might be very inaccurate.\n"
)

# Optional unbiased variant: drops the presumption that the answer is wrong.
NEUTRAL_REVIEW_SYSTEM_PROMPT = (
    "You are an uncompromising Physics peer-reviewer. Your job is to find *every* logical, "
    "mathematical error in the worker's answer. "
    "Check dimensional consistency, missing steps, incorrect sign conventions, numerical "
    "mistakes, and unclear explanations. Focus especially on wrong answers, less on presentations."
    "Be extremely critical: if something is wrong, point it out and request clarification or "
    "correction. Mainly focus on errors that would lead to a wrong result, rather than focusing "
    "extremely on presentation or style."
    "The worker's answer may or may not contain errors; check it carefully and point out any you "
    "find. Also, if the worker reads measurements from image, make sure to remind the worker that "
    "whenever it reads or measures from image, it uses the ask_image_expert tool, or the readings "
    "might be very inaccurate.\n"
)


def review_instruction(solution: str, note: str) -> str:
    return (
        f"Please review the following solution:\n\n"
        f"WORKER'S SOLUTION:\n{solution}\n\n"
        f"WORKER'S NOTE: {note}\n\n"
        f"Please provide detailed feedback on correctness. "
        f"Point out any errors, wrong steps, focus more on correctness rather than presentation."
        f"The original problem follows:"
    )


SUMMARIZER_SYSTEM_PROMPT = (
    "You compact the working notes of a physics problem solver. Rewrite the transcript below "
    "into a concise progress summary. Preserve: established results and their sub-question ids, "
    "derived formulas, measured values with units, and which sub-questions are still pending. "
    "Drop verbatim tool outputs and dead ends."
)


def summarizer_instruction(trajectory_text: str, char_budget: int) -> str:
    return (
        f"Keep the summary under {char_budget} characters.\n\n"
        f"TRANSCRIPT:\n{trajectory_text}"
    )


JUDGE_SYSTEM_PROMPT = (
    "You check whether a solution addresses one specific scoring criterion of a physics problem. "
    "Answer with a single word: yes or no. Answer yes only if the solution substantively "
    "addresses the criterion; partial or absent treatment is no."
)


def judge_instruction(point_description: str, answer_text: str) -> str:
    return (
        f"SCORING CRITERION:\n{point_description}\n\n"
        f"SOLUTION EXCERPTS:\n{answer_text}\n\n"
        f"Does the solution address this criterion? Answer yes or no."
    )
