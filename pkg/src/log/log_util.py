import json
import os


def load_json(file_path, default=None):
    """
    Load a JSON file and return its content.

    Args:
        file_path (str): The path to the JSON file.
        default: Returned when the file does not exist.

    Returns:
        The decoded document, or `default`.

    Raises:
        json.JSONDecodeError: If the file is not valid JSON.
    """
    if not os.path.exists(file_path):
        return {} if default is None else default

    with open(file_path, 'r', encoding='utf-8') as f:
        return json.load(f)


def save_json(file_path, data):
    """
    Save data to a JSON file.

    Keys keep insertion order and floats are written with their shortest round-trip
    repr, so equal documents produce identical bytes.

    Args:
        file_path (str): The path to the JSON file.
        data (dict): The data to save.
    """
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write('\n')
