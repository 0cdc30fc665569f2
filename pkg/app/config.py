# app/config.py
"""
Módulo de Configuración
=======================
Carga y valida las variables de entorno de ejecución del workbench. No
alteran la semántica de los escenarios: solo registro, directorios de salida
y paralelismo.
"""
from pathlib import Path
from typing import Optional
from pydantic_settings import BaseSettings
from functools import lru_cache
import logging

BASE_DIR = Path(__file__).resolve().parent.parent
ENV_PATH = BASE_DIR / ".env"

class Settings(BaseSettings):
    """
    Clase que define y valida las configuraciones de la aplicación.

    Attributes:
        APP_NAME (str): Nombre de la aplicación.
        APP_VERSION (str): Versión de la aplicación.
        LOG_LEVEL (str): Nivel de registro.
        LOG_FILE (Optional[str]): Archivo de registro adicional.
        OUTPUT_DIR (str): Directorio de salida por omisión.
        SWEEP_WORKERS (int): Procesos por omisión del barrido.
    """
    # Configuración de la aplicación
    APP_NAME: str = "IBVS Workbench"
    APP_VERSION: str = "1.0.0"

    # Registro
    LOG_LEVEL: str = "WARNING"
    LOG_FILE: Optional[str] = None

    # Ejecución
    OUTPUT_DIR: str = "results"
    SWEEP_WORKERS: int = 1

    class Config:
        env_file = ENV_PATH
        env_prefix = "IBVS_"
        case_sensitive = True
        extra = "ignore"

@lru_cache()
def get_settings() -> Settings:
        """
        Obtiene una instancia de Settings con caché.

        Returns:
            Settings: Instancia de la configuración.
        """
        try:
            return Settings()
        except Exception as e:
            logging.error(f"Error al cargar la configuración: {str(e)}")
            raise

settings = get_settings()
