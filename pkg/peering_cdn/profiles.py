"""User defaults for the ``cdnpeer`` command line tool.

Defaults are kept as named profiles in an INI ``profiles`` file. By default the file lives in a ``.cdnpeer`` directory in the
user's home directory (as determined by :meth:`Path.home <pathlib.Path.home>`); if a ``CDNPEER_HOME`` environment variable is
present, that directory is used instead. Profiles only change how runs are executed and where outputs go, never their results.
"""

import configparser
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional

from .exceptions import ConfigurationError, ProfileNotFound

HOME_ENV_VARIABLE = 'CDNPEER_HOME'
PROFILE_ENV_VARIABLE = 'CDNPEER_PROFILE'
DEFAULT_PROFILE = 'default'


def config_home() -> Path:
    return Path(os.getenv(HOME_ENV_VARIABLE, Path.home() / '.cdnpeer'))


def profiles_path() -> Path:
    return config_home() / 'profiles'


@dataclass(frozen=True)
class Profile:
    """Resolved user defaults.

    Attributes
    ----------
    name : str
        Name of the profile section the values came from.
    jobs : int
        Worker threads used by ``cdnpeer sweep``.
    out_dir : Path, optional
        Output directory used when ``--out`` is not given.
    progress : bool
        Whether to show progress bars.
    """
    name: str = DEFAULT_PROFILE
    jobs: int = 4
    out_dir: Optional[Path] = None
    progress: bool = True

    @classmethod
    def from_config(cls, profile: Optional[str] = None) -> 'Profile':
        """Reads the given profile from the ``profiles`` file.

        Parameters
        ----------
        profile : str, optional
            The name of a profile configured in the ``profiles`` file. Defaults to ``"default"``.

        Returns
        -------
        profile : Profile

        Raises
        ------
        ProfileNotFound
            If the file does not exist or has no section for ``profile``.
        ConfigurationError
            If a value in the section cannot be parsed.
        """
        config_path = profiles_path()
        if not config_path.exists():
            raise ProfileNotFound(f'No file found at {config_path}')

        config = configparser.ConfigParser()
        config.read(config_path)

        profile = profile or DEFAULT_PROFILE  # Use the default profile if the given profile is None or empty

        if profile not in config.sections():
            raise ProfileNotFound(f'Could not find "{profile}" section in {config_path}')
        section = config[profile]
        try:
            return cls(
                name=profile,
                jobs=section.getint('jobs', fallback=cls.jobs),
                out_dir=Path(section['out_dir']) if section.get('out_dir') else None,
                progress=section.getboolean('progress', fallback=cls.progress),
            )
        except ValueError as e:
            raise ConfigurationError(f'Invalid value in "{profile}" section of {config_path}: {e}') from None


def get_profile(profile: Optional[str] = None) -> Profile:
    """Resolves user defaults, looking for a profile name in this order of preference:

    1) The ``profile`` argument
    2) A ``CDNPEER_PROFILE`` environment variable
    3) The ``default`` profile

    A missing ``default`` profile (or a missing ``profiles`` file) yields the built-in defaults; a profile that was asked for by name
    must exist.

    Raises
    ------
    ProfileNotFound
        If a profile named by argument or environment variable cannot be found.

    Examples
    --------
    >>> from peering_cdn.profiles import get_profile
    # Use the "default" profile, or the built-in defaults
    >>> profile = get_profile()
    # Use the "cluster" profile
    # Alternatively, you could set the CDNPEER_PROFILE environment variable to "cluster"
    >>> profile = get_profile('cluster')
    """
    name = profile or os.getenv(PROFILE_ENV_VARIABLE)
    try:
        return Profile.from_config(name)
    except ProfileNotFound:
        if name and name != DEFAULT_PROFILE:
            raise ProfileNotFound(f'Could not resolve the "{name}" profile from {profiles_path()}.') from None
        return Profile()


def write_profile(name: str, values: Dict[str, str]) -> Path:
    """Sets ``values`` in the ``name`` section of the ``profiles`` file, creating the file and its directory as needed. Keys that
    are not profile settings are rejected."""
    known = {f.name for f in fields(Profile)} - {'name'}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f'Unknown profile settings: {", ".join(sorted(unknown))}')

    config_path = profiles_path()
    config = configparser.ConfigParser()
    config.read(config_path)
    if not config.has_section(name):
        config[name] = {}
    for key, value in values.items():
        config[name][key] = value

    # Create the parent directory if it does not exist
    config_path.parent.mkdir(parents=True, exist_ok=True)

    with config_path.open('w') as dst:
        config.write(dst)
    return config_path
