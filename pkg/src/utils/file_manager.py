"""
实验文件管理器
Experiment File Manager

统一管理各命令产生的结果文件，按文件类别放入会话目录的子目录。
文件内容与目录名均不含时间戳，同一配置重复运行得到逐字节相同的输出。
"""

import json
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd


class ExperimentFileManager:
    """实验文件管理器"""

    def __init__(self, base_output_dir: str = "outputs"):
        """
        初始化文件管理器

        Args:
            base_output_dir: 基础输出目录
        """
        self.base_output_dir = Path(base_output_dir)
        self.base_output_dir.mkdir(parents=True, exist_ok=True)

        # 文件类别 → 子目录
        self.file_categories = {
            'zeros': 'zeros',                   # 零点文件与计数函数
            'kernels': 'kernels',               # 核网格转储
            'reconstruction': 'reconstruction',  # 重构结果
            'sweeps': 'sweeps',                 # 稳定性扫描
            'reports': 'reports',               # 包络与汇总
        }

    def create_session_directory(self, session_name: str) -> Path:
        """
        创建会话目录及其类别子目录

        Args:
            session_name: 会话名称（通常为命令名）

        Returns:
            会话目录路径
        """
        session_dir = self.base_output_dir / session_name
        session_dir.mkdir(parents=True, exist_ok=True)
        for subdir in self.file_categories.values():
            (session_dir / subdir).mkdir(exist_ok=True)
        return session_dir

    def get_file_path(self, session_dir: Path, file_type: str, filename: str) -> Path:
        """
        获取指定类型文件的完整路径

        Args:
            session_dir: 会话目录
            file_type: 文件类别
            filename: 文件名

        Returns:
            文件完整路径
        """
        if file_type not in self.file_categories:
            raise ValueError(f"未知文件类型: {file_type}")
        return session_dir / self.file_categories[file_type] / filename

    def save_file(self, session_dir: Path, file_type: str, filename: str, data) -> Path:
        """
        保存文件到会话目录

        DataFrame 写为 CSV（LF 行尾、无索引），dict 写为 JSON，其余按文本写出。

        Args:
            session_dir: 会话目录
            file_type: 文件类别
            filename: 文件名
            data: 数据

        Returns:
            保存的文件路径
        """
        file_path = self.get_file_path(session_dir, file_type, filename)
        if isinstance(data, pd.DataFrame):
            data.to_csv(file_path, index=False, lineterminator='\n')
        elif isinstance(data, dict):
            with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
                json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True, default=str)
        else:
            with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
                f.write(str(data))

        print(f"✓ 文件已保存: {file_path}")
        return file_path

    def create_session_manifest(self, session_dir: Path, command: str,
                                metadata: Optional[Dict] = None) -> Path:
        """
        创建会话清单 session_manifest.json

        Args:
            session_dir: 会话目录
            command: 命令名
            metadata: 额外元数据

        Returns:
            清单文件路径
        """
        manifest = {
            'session_info': {
                'session_directory': session_dir.name,
                'command': command,
            },
            'file_structure': {},
            'metadata': metadata or {},
        }
        for category, subdir in self.file_categories.items():
            subdir_path = session_dir / subdir
            if subdir_path.exists():
                files = sorted(f.name for f in subdir_path.glob('*') if f.is_file())
                if files:
                    manifest['file_structure'][category] = {
                        'directory': subdir,
                        'files': files,
                        'count': len(files),
                    }

        manifest_path = session_dir / "session_manifest.json"
        with open(manifest_path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True, default=str)
        print(f"✓ 会话清单已创建: {manifest_path}")
        return manifest_path

    def list_sessions(self) -> List[Dict[str, str]]:
        """列出带清单的会话"""
        sessions = []
        for session_dir in sorted(self.base_output_dir.iterdir()):
            manifest_path = session_dir / "session_manifest.json"
            if session_dir.is_dir() and manifest_path.exists():
                with open(manifest_path, 'r', encoding='utf-8') as f:
                    info = json.load(f).get('session_info', {})
                sessions.append({
                    'directory': session_dir.name,
                    'command': info.get('command', ''),
                    'full_path': str(session_dir),
                })
        return sessions


class SessionContext:
    """会话上下文管理器"""

    def __init__(self, file_manager: ExperimentFileManager, command: str,
                 metadata: Optional[Dict] = None):
        """
        初始化会话上下文

        Args:
            file_manager: 文件管理器实例
            command: 命令名（同时作为会话目录名）
            metadata: 写入清单的元数据
        """
        self.file_manager = file_manager
        self.command = command
        self.metadata = dict(metadata or {})
        self.session_dir: Optional[Path] = None
        self.saved: List[Path] = []

    def __enter__(self):
        self.session_dir = self.file_manager.create_session_directory(self.command)
        print(f"🗂️  会话目录: {self.session_dir}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.session_dir is not None:
            if exc_type is not None:
                self.metadata['error'] = f"{exc_type.__name__}: {exc_val}"
            self.file_manager.create_session_manifest(self.session_dir, self.command, self.metadata)
            print(f"📋 会话已完成: {self.session_dir.name}")
        return False

    def save_file(self, file_type: str, filename: str, data) -> Path:
        """保存文件到当前会话"""
        path = self.file_manager.save_file(self.session_dir, file_type, filename, data)
        self.saved.append(path)
        return path

    def get_file_path(self, file_type: str, filename: str) -> Path:
        """获取当前会话内的文件路径"""
        return self.file_manager.get_file_path(self.session_dir, file_type, filename)
