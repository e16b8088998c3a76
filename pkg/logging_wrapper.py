import functools
import logging
import time
from typing import Callable, List, Optional, Type, get_args, get_origin

import numpy as np
from pydantic import BaseModel, ValidationError

from game_errors import OutputValidationError

MAX_ARG_REPR = 500
MAX_SIGNATURE = 1000


def get_basic_type_info(obj) -> str:
    """Get basic type information without deep inspection"""
    if isinstance(obj, np.ndarray):
        return f"ndarray{obj.shape}"
    if isinstance(obj, dict):
        return f"dict[{len(obj)} keys]"
    elif isinstance(obj, (list, tuple)):
        return f"{type(obj).__name__}[{len(obj)} items]"
    elif isinstance(obj, BaseModel):
        return f"{type(obj).__name__}[Pydantic]"
    else:
        return type(obj).__name__


def _short_repr(value) -> str:
    if isinstance(value, np.ndarray) and value.size > 16:
        return f"<ndarray shape={value.shape}>"
    return repr(value)[:MAX_ARG_REPR]


def _validate(func_name: str, result, output_model) -> None:
    try:
        origin = get_origin(output_model)
        if origin is list or origin is List:
            item_model = get_args(output_model)[0]
            for item in result:
                item_model.model_validate(item)
        elif issubclass(output_model, BaseModel):
            output_model.model_validate(result)
        else:
            raise ValueError("Unsupported output_model type")
    except ValidationError as ve:
        raise OutputValidationError(
            f"{func_name}: output validation failed: {ve.error_count()} error(s)",
            {"function": func_name},
        ) from ve


def log_and_validate(
    logger: logging.Logger,
    validate_output: bool = False,
    output_model: Optional[Type[BaseModel]] = None,
):
    """Log the call signature, time the wrapped call and optionally check the
    result against ``output_model``.

    Meant for coarse operations (whole recursions, batches of rollouts,
    experiment runs); per-step helpers stay unwrapped.
    """

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            wrapper_start = time.perf_counter()

            args_repr = [_short_repr(a) for a in args]
            kwargs_repr = [f"{k}={_short_repr(v)}" for k, v in kwargs.items()]
            signature = ", ".join(args_repr + kwargs_repr)
            if len(signature) > MAX_SIGNATURE:
                signature = signature[:MAX_SIGNATURE] + "..."
            logger.info(f"{func.__name__} called with args: {signature}")

            overhead = time.perf_counter() - wrapper_start

            try:
                func_start = time.perf_counter()
                result = func(*args, **kwargs)
                func_time = time.perf_counter() - func_start

                post_start = time.perf_counter()
                if validate_output and output_model:
                    _validate(func.__name__, result, output_model)
                post_end = time.perf_counter()
                total_overhead = overhead + (post_end - post_start)
                total_time = post_end - wrapper_start

                logger.info(
                    f"{func.__name__} execution details:\n"
                    f"Timing:\n"
                    f"  - Core function execution: {func_time:.4f}s\n"
                    f"  - Logging/validation overhead: {total_overhead:.4f}s\n"
                    f"  - Total time: {total_time:.4f}s\n"
                    f"Returned: {get_basic_type_info(result)}"
                )
                return result

            except Exception as e:
                total_time = time.perf_counter() - wrapper_start
                logger.exception(f"{func.__name__}: Error after {total_time:.4f}s: {str(e)}")
                raise

        return wrapper

    return decorator
