"""LLM agents for flow selection and prediction."""
